"""Shared domain types: precisions, precision configurations, block vectors.

Everything here is an immutable value or a pure function. The one piece of
mutable state is the module-level cast counter, which exists so that tests
can assert how many precision conversions a matvec performed.
"""

from __future__ import annotations

import enum
import itertools
import threading
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Precision",
    "PrecisionConfig",
    "PrecisionConfigError",
    "ProblemDims",
    "Layout",
    "Domain",
    "BlockVector",
    "PHASE_NAMES",
    "parse_precision_config",
    "enumerate_configs",
    "cast_buffer",
    "reorder",
    "cast_counter",
]

PHASE_NAMES = ("pad", "fft", "sbgemv", "ifft", "unpad")


class Precision(enum.Enum):
    SINGLE = "s"
    DOUBLE = "d"

    @property
    def real_dtype(self) -> np.dtype:
        return np.dtype(np.float32 if self is Precision.SINGLE else np.float64)

    @property
    def complex_dtype(self) -> np.dtype:
        return np.dtype(np.complex64 if self is Precision.SINGLE else np.complex128)

    @property
    def eps(self) -> float:
        return float(np.finfo(self.real_dtype).eps)

    def dtype_for(self, complex_: bool) -> np.dtype:
        return self.complex_dtype if complex_ else self.real_dtype

    @classmethod
    def of(cls, arr) -> "Precision":
        """Precision of a float32/float64/complex64/complex128 array or dtype."""
        dt = np.dtype(getattr(arr, "dtype", arr))
        if dt in (np.float32, np.complex64):
            return cls.SINGLE
        if dt in (np.float64, np.complex128):
            return cls.DOUBLE
        raise TypeError(f"unsupported dtype {dt}")

    @staticmethod
    def lower(a: "Precision", b: "Precision") -> "Precision":
        return Precision.SINGLE if Precision.SINGLE in (a, b) else Precision.DOUBLE


class PrecisionConfigError(ValueError):
    """Malformed precision configuration string."""


@dataclass(frozen=True)
class PrecisionConfig:
    """Compute precision of each of the five matvec phases.

    Index 0 is pad/broadcast, 1 the FFT, 2 the batched GEMV, 3 the inverse
    FFT and 4 unpad/reduce. The same positional meaning applies to both the
    forward and the adjoint pipeline.
    """

    phases: tuple[Precision, Precision, Precision, Precision, Precision]

    def __post_init__(self):
        if len(self.phases) != 5 or not all(isinstance(p, Precision) for p in self.phases):
            raise PrecisionConfigError("a precision config holds exactly 5 Precision values")

    def __str__(self) -> str:
        return "".join(p.value for p in self.phases)

    def __getitem__(self, i: int) -> Precision:
        return self.phases[i]

    def render(self) -> str:
        return str(self)

    @classmethod
    def parse(cls, s: str) -> "PrecisionConfig":
        return parse_precision_config(s)

    @classmethod
    def all_double(cls) -> "PrecisionConfig":
        return cls((Precision.DOUBLE,) * 5)

    @property
    def is_all_double(self) -> bool:
        return all(p is Precision.DOUBLE for p in self.phases)


def parse_precision_config(s: str) -> PrecisionConfig:
    """Parse a 5-character ``{d,s}`` string such as ``"dssdd"``.

    Errors name the 1-based position of the first offending character.
    """
    if not isinstance(s, str):
        raise PrecisionConfigError(f"precision config must be a string, got {type(s).__name__}")
    for pos, ch in enumerate(s, start=1):
        if ch not in "ds":
            raise PrecisionConfigError(
                f"invalid precision {ch!r} at position {pos} of {s!r} (expected 'd' or 's')"
            )
    if len(s) != 5:
        pos = 6 if len(s) > 5 else len(s) + 1
        raise PrecisionConfigError(
            f"precision config must have 5 characters, got {len(s)} in {s!r} "
            f"(position {pos} {'unexpected' if len(s) > 5 else 'missing'})"
        )
    return PrecisionConfig(tuple(Precision(ch) for ch in s))


def enumerate_configs() -> list[PrecisionConfig]:
    """All 32 configurations, lexicographic over ``'d' < 's'``."""
    return [PrecisionConfig(tuple(Precision(c) for c in combo))
            for combo in itertools.product("ds", repeat=5)]


@dataclass(frozen=True)
class ProblemDims:
    n_m: int
    n_d: int
    n_t: int

    def __post_init__(self):
        for name in ("n_m", "n_d", "n_t"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")

    @property
    def fft_len(self) -> int:
        return 2 * self.n_t

    @property
    def n_bins(self) -> int:
        return self.n_t + 1


class Layout(enum.IntEnum):
    """SOTI: space-outer/time-inner. TOSI: time-outer/space-inner."""

    SOTI = 0
    TOSI = 1


class Domain(enum.IntEnum):
    TIME = 0
    FREQUENCY = 1


@dataclass(frozen=True, eq=False)
class BlockVector:
    """A space x time block vector stored as one flat buffer.

    ``data`` is 1-D; element (s, t) lives at ``s * time_extent + t`` in SOTI
    layout and at ``t * space_extent + s`` in TOSI layout.
    """

    data: np.ndarray
    space_extent: int
    time_extent: int
    layout: Layout = Layout.SOTI
    domain: Domain = Domain.TIME

    def __post_init__(self):
        data = self.data
        if data.ndim != 1:
            raise ValueError("BlockVector data must be a flat 1-D buffer")
        if data.size != self.space_extent * self.time_extent:
            raise ValueError(
                f"buffer length {data.size} != {self.space_extent} x {self.time_extent}"
            )
        Precision.of(data)
        is_complex = np.iscomplexobj(data)
        if self.domain is Domain.TIME and is_complex:
            raise ValueError("time-domain BlockVector must hold real elements")
        if self.domain is Domain.FREQUENCY and not is_complex:
            raise ValueError("frequency-domain BlockVector must hold complex elements")
        object.__setattr__(self, "layout", Layout(self.layout))
        object.__setattr__(self, "domain", Domain(self.domain))

    @property
    def precision(self) -> Precision:
        return Precision.of(self.data)

    @property
    def shape2d(self) -> tuple[int, int]:
        if self.layout is Layout.SOTI:
            return (self.space_extent, self.time_extent)
        return (self.time_extent, self.space_extent)

    def as_2d(self) -> np.ndarray:
        """View in storage order: (space, time) for SOTI, (time, space) for TOSI."""
        return self.data.reshape(self.shape2d)

    def space_time(self) -> np.ndarray:
        """(space, time) array regardless of storage layout (a view, possibly strided)."""
        a = self.as_2d()
        return a if self.layout is Layout.SOTI else a.T

    @classmethod
    def from_space_time(cls, arr, layout: Layout = Layout.SOTI,
                        domain: Domain | None = None) -> "BlockVector":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise ValueError("expected a (space, time) 2-D array")
        s, t = arr.shape
        if domain is None:
            domain = Domain.FREQUENCY if np.iscomplexobj(arr) else Domain.TIME
        stored = arr if layout is Layout.SOTI else arr.T
        return cls(np.ascontiguousarray(stored).ravel(), s, t, layout, domain)

    def bitwise_equal(self, other: "BlockVector") -> bool:
        return (
            self.space_extent == other.space_extent
            and self.time_extent == other.time_extent
            and self.layout == other.layout
            and self.domain == other.domain
            and self.data.dtype == other.data.dtype
            and self.data.tobytes() == other.data.tobytes()
        )


class _CastCounter:
    """Counts precision-changing conversions. Thread-safe."""

    def __init__(self):
        self._lock = threading.Lock()
        self._count = 0

    def add(self, n: int = 1) -> None:
        with self._lock:
            self._count += n

    @property
    def value(self) -> int:
        return self._count

    def reset(self) -> None:
        with self._lock:
            self._count = 0


cast_counter = _CastCounter()


def cast_buffer(src: np.ndarray, from_: Precision, to: Precision) -> np.ndarray:
    """Convert a real or complex buffer between precisions.

    Narrowing uses IEEE round-to-nearest-even (numpy's ``astype``), widening
    is exact and a same-precision cast returns a bitwise copy.
    """
    src = np.asarray(src)
    if Precision.of(src) is not from_:
        raise TypeError(f"buffer dtype {src.dtype} does not match source precision {from_.name}")
    out = src.astype(to.dtype_for(np.iscomplexobj(src)), copy=True)
    if from_ is not to:
        cast_counter.add()
    return out


def reorder(v: BlockVector, target: Layout) -> BlockVector:
    """Transpose between SOTI and TOSI storage. Values are never altered."""
    target = Layout(target)
    if v.layout is target:
        return BlockVector(v.data.copy(), v.space_extent, v.time_extent, v.layout, v.domain)
    flat = np.ascontiguousarray(v.as_2d().T).ravel()
    return BlockVector(flat, v.space_extent, v.time_extent, target, v.domain)
