"""Strided batched GEMV kernels for the per-frequency-bin matvec.

Each matrix in a batch is stored column-major, so a batch of ``b`` matrices
of shape ``m x n`` is held as a C-contiguous array of shape ``(b, n, m)``:
``data[k, j, i]`` is row ``i``, column ``j`` of matrix ``k``. With this
storage a (conjugate-)transpose product is a set of unit-stride column dot
products, which the tiled kernel blocks over columns and rows.

Accumulation always happens in the operand precision. There is no hidden
widening, so single-precision phases show single-precision error.
"""

from __future__ import annotations

import enum
import re
import time
from dataclasses import dataclass, field

import numba
import numpy as np

from .core import Precision

__all__ = [
    "GemvMode",
    "KernelChoice",
    "MatrixBatch",
    "TilingParams",
    "gemv_batched_naive",
    "gemv_batched_tiled",
    "gemv_batched",
    "select_kernel",
    "effective_bandwidth",
    "BenchConfig",
    "read_bench_configs",
    "run_bench",
]


class GemvMode(enum.Enum):
    NO_TRANS = "N"
    TRANS = "T"
    CONJ_TRANS = "H"

    @property
    def is_transpose(self) -> bool:
        return self is not GemvMode.NO_TRANS


class KernelChoice(enum.Enum):
    NAIVE = "naive"
    TILED = "tiled"


@dataclass(frozen=True)
class TilingParams:
    """Tile shape and dispatch thresholds for the tiled transpose kernel.

    ``dispatch_ratio`` and ``max_rows`` play the role of the transition
    points in a BLAS host launcher: the tiled kernel is used only for
    short-wide matrices (``m < dispatch_ratio * n`` and ``m <= max_rows``).
    """

    col_tile: int = 256
    row_chunk: int = 64
    dispatch_ratio: float = 1.0
    max_rows: int = 1024

    def __post_init__(self):
        if self.col_tile < 1 or self.row_chunk < 1:
            raise ValueError("col_tile and row_chunk must be >= 1")
        if self.dispatch_ratio <= 0:
            raise ValueError("dispatch_ratio must be positive")


@dataclass(frozen=True, eq=False)
class MatrixBatch:
    """Batch of column-major ``rows x cols`` matrices at a fixed stride."""

    data: np.ndarray  # shape (batch, cols, rows)

    def __post_init__(self):
        d = self.data
        if d.ndim != 3:
            raise ValueError("MatrixBatch data must have shape (batch, cols, rows)")
        if not d.flags.c_contiguous:
            raise ValueError("MatrixBatch data must be C-contiguous")
        Precision.of(d)

    @classmethod
    def from_matrices(cls, mats) -> "MatrixBatch":
        """Build from a ``(batch, rows, cols)`` array of ordinary matrices."""
        mats = np.asarray(mats)
        return cls(np.ascontiguousarray(np.swapaxes(mats, 1, 2)))

    def matrices(self) -> np.ndarray:
        """``(batch, rows, cols)`` view."""
        return np.swapaxes(self.data, 1, 2)

    @property
    def batch(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def rows(self) -> int:
        return self.data.shape[2]

    @property
    def lda(self) -> int:
        return self.rows

    @property
    def stride_a(self) -> int:
        return self.rows * self.cols

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.data)

    @property
    def precision(self) -> Precision:
        return Precision.of(self.data)


# --- compiled loops ---------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _gemv_n_loop(a, x, y):
    b, n, m = a.shape
    for k in range(b):
        for j in range(n):
            xj = x[k, j]
            for i in range(m):
                y[k, i] += a[k, j, i] * xj


@numba.njit(cache=True, nogil=True)
def _gemv_t_loop(a, x, y, conj):
    b, n, m = a.shape
    for k in range(b):
        for j in range(n):
            acc = y[k, j]
            if conj:
                for i in range(m):
                    acc += a[k, j, i].conjugate() * x[k, i]
            else:
                for i in range(m):
                    acc += a[k, j, i] * x[k, i]
            y[k, j] = acc


@numba.njit(cache=True, nogil=True)
def _gemv_t_tiled_loop(a, x, y, conj, col_tile, row_chunk):
    b, n, m = a.shape
    zero = y[0, 0] - y[0, 0]  # y is zeroed; keeps the operand dtype
    for k in range(b):
        for j0 in range(0, n, col_tile):
            j1 = min(j0 + col_tile, n)
            for i0 in range(0, m, row_chunk):
                i1 = min(i0 + row_chunk, m)
                for j in range(j0, j1):
                    part = zero
                    if conj:
                        for i in range(i0, i1):
                            part += a[k, j, i].conjugate() * x[k, i]
                    else:
                        for i in range(i0, i1):
                            part += a[k, j, i] * x[k, i]
                    if i0 == 0:
                        y[k, j] = part
                    else:
                        y[k, j] += part


# --- public kernels ---------------------------------------------------------


def _check_operands(mode: GemvMode, A: MatrixBatch, x: np.ndarray, y: np.ndarray | None):
    x = np.asarray(x)
    in_len, out_len = (A.cols, A.rows) if mode is GemvMode.NO_TRANS else (A.rows, A.cols)
    if x.shape != (A.batch, in_len):
        raise ValueError(f"x must have shape {(A.batch, in_len)} for mode {mode.name}, got {x.shape}")
    if x.dtype != A.data.dtype:
        raise TypeError(f"x dtype {x.dtype} does not match matrix dtype {A.data.dtype}")
    x = np.ascontiguousarray(x)
    if y is None:
        y = np.zeros((A.batch, out_len), dtype=A.data.dtype)
    else:
        if y.shape != (A.batch, out_len) or y.dtype != A.data.dtype:
            raise ValueError(f"y must be a {A.data.dtype} array of shape {(A.batch, out_len)}")
        if not y.flags.c_contiguous:
            raise ValueError("y must be C-contiguous")
        y[...] = 0
    return x, y


def gemv_batched_naive(mode: GemvMode, A: MatrixBatch, x, y=None) -> np.ndarray:
    """Reference batched GEMV: ``y_k = op(A_k) x_k`` with ``op`` per ``mode``.

    ``x`` is ``(batch, n)`` for NoTrans and ``(batch, m)`` otherwise. Sums
    run in ascending index order in the operand precision.
    """
    mode = GemvMode(mode)
    x, y = _check_operands(mode, A, x, y)
    if A.batch == 0 or y.shape[1] == 0:
        return y
    if mode is GemvMode.NO_TRANS:
        _gemv_n_loop(A.data, x, y)
    else:
        conj = mode is GemvMode.CONJ_TRANS and A.is_complex
        _gemv_t_loop(A.data, x, y, conj)
    return y


def gemv_batched_tiled(mode: GemvMode, A: MatrixBatch, x, y=None,
                       params: TilingParams | None = None) -> np.ndarray:
    """Column-tiled (conjugate-)transpose batched GEMV for short-wide matrices.

    Columns are processed in tiles of ``params.col_tile``; for each tile the
    rows are swept in chunks of ``params.row_chunk`` so the matching slice of
    ``x`` stays hot while every column of the tile consumes it. Per-chunk
    partial dot products are added into the output in operand precision.
    When ``row_chunk >= m`` the result is bitwise equal to the naive kernel.
    """
    mode = GemvMode(mode)
    if not mode.is_transpose:
        raise ValueError("tiled kernel supports only Trans/ConjTrans; use gemv_batched_naive")
    params = params or TilingParams()
    x, y = _check_operands(mode, A, x, y)
    if A.batch == 0 or y.shape[1] == 0 or A.rows == 0:
        return y
    conj = mode is GemvMode.CONJ_TRANS and A.is_complex
    _gemv_t_tiled_loop(A.data, x, y, conj, params.col_tile, params.row_chunk)
    return y


def select_kernel(m: int, n: int, mode: GemvMode, params: TilingParams | None = None) -> KernelChoice:
    params = params or TilingParams()
    if (GemvMode(mode).is_transpose and m < params.dispatch_ratio * n
            and m <= params.max_rows):
        return KernelChoice.TILED
    return KernelChoice.NAIVE


def gemv_batched(mode: GemvMode, A: MatrixBatch, x, y=None,
                 params: TilingParams | None = None) -> np.ndarray:
    """Dispatching entry point used by the matvec pipeline."""
    mode = GemvMode(mode)
    if select_kernel(A.rows, A.cols, mode, params) is KernelChoice.TILED:
        return gemv_batched_tiled(mode, A, x, y, params)
    return gemv_batched_naive(mode, A, x, y)


def effective_bandwidth(m: int, n: int, batch: int, elem_bytes: int, seconds: float) -> float:
    """GB/s for one batched GEMV: each matrix read once, both vectors touched once."""
    if not seconds > 0:
        raise ValueError(f"seconds must be positive, got {seconds}")
    return batch * (m * n + m + n) * elem_bytes / (seconds * 1e9)


# --- bench rows -------------------------------------------------------------

_FUNC_RE = re.compile(r"^rocblas_([sdcz])gemv_strided_batched$")
_DTYPES = {"s": np.float32, "d": np.float64, "c": np.complex64, "z": np.complex128}


@dataclass
class BenchConfig:
    """One benchmark row in ``{key: value, ...}`` form.

    ``M = lda = stride_y`` rows, ``N = stride_x`` columns and
    ``stride_a = M*N``; ``transA`` is ``T``, ``H`` or ``N``.
    """

    M: int
    N: int
    transA: str = "T"
    batch_count: int = 100
    rocblas_function: str = "rocblas_sgemv_strided_batched"
    cold_iters: int = 2
    iters: int = 10
    lda: int | None = None
    stride_a: int | None = None
    stride_x: int | None = None
    stride_y: int | None = None
    alpha: float = 1.0
    beta: float = 0.0
    incx: int = 1
    incy: int = 1
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lda is None:
            self.lda = self.M
        if self.stride_a is None:
            self.stride_a = self.M * self.N
        in_len, out_len = (self.N, self.M) if self.transA == "N" else (self.M, self.N)
        if self.stride_x is None:
            self.stride_x = in_len
        if self.stride_y is None:
            self.stride_y = out_len
        if not _FUNC_RE.match(self.rocblas_function):
            raise ValueError(f"unknown gemv function {self.rocblas_function!r}")
        if self.transA not in ("N", "T", "H"):
            raise ValueError(f"transA must be N, T or H, got {self.transA!r}")
        if self.lda != self.M or self.stride_a != self.M * self.N:
            raise ValueError("only packed batches are supported (lda == M, stride_a == M*N)")
        if self.stride_x != in_len or self.stride_y != out_len:
            raise ValueError("only packed vectors are supported (stride_x/stride_y == vector length)")
        if (self.alpha, self.beta, self.incx, self.incy) != (1.0, 0.0, 1, 1):
            raise ValueError("only alpha=1, beta=0, incx=incy=1 are supported")

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(_DTYPES[_FUNC_RE.match(self.rocblas_function).group(1)])

    @property
    def mode(self) -> GemvMode:
        return GemvMode(self.transA)

    @classmethod
    def from_line(cls, line: str) -> "BenchConfig":
        body = line.strip()
        if body.startswith("-"):
            body = body[1:].strip()
        if not (body.startswith("{") and body.endswith("}")):
            raise ValueError(f"bench row must be a {{key: value, ...}} mapping: {line!r}")
        known = set(cls.__dataclass_fields__) - {"extra"}
        kwargs, extra = {}, {}
        for item in filter(None, (p.strip() for p in body[1:-1].split(","))):
            key, sep, raw = item.partition(":")
            if not sep:
                raise ValueError(f"malformed entry {item!r}")
            key, raw = key.strip(), raw.strip()
            value = _coerce(raw)
            (kwargs if key in known else extra)[key] = value
        return cls(**kwargs, extra=extra)

    def to_line(self) -> str:
        keys = ("M", "N", "alpha", "batch_count", "beta", "cold_iters", "incx", "incy",
                "iters", "lda", "rocblas_function", "stride_a", "stride_x", "stride_y", "transA")
        return "- {" + ", ".join(f"{k}: {getattr(self, k)}" for k in keys) + "}"


def _coerce(raw: str):
    for conv in (int, float):
        try:
            return conv(raw)
        except ValueError:
            pass
    return raw


def read_bench_configs(text: str) -> list[BenchConfig]:
    rows = []
    for line in text.splitlines():
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        rows.append(BenchConfig.from_line(s))
    return rows


def run_bench(cfg: BenchConfig, params: TilingParams | None = None,
              kernel: KernelChoice | None = None, seed: int = 0) -> dict:
    """Time one bench row; returns timing and effective bandwidth."""
    rng = np.random.default_rng(seed)
    dt = cfg.dtype
    shape = (cfg.batch_count, cfg.N, cfg.M)
    data = rng.standard_normal(shape)
    if np.issubdtype(dt, np.complexfloating):
        data = data + 1j * rng.standard_normal(shape)
    A = MatrixBatch(np.ascontiguousarray(data.astype(dt)))
    in_len = cfg.N if cfg.mode is GemvMode.NO_TRANS else cfg.M
    x = rng.standard_normal((cfg.batch_count, in_len)).astype(dt)
    if kernel is None:
        kernel = select_kernel(cfg.M, cfg.N, cfg.mode, params)
    if kernel is KernelChoice.TILED:
        fn = lambda: gemv_batched_tiled(cfg.mode, A, x, params=params)  # noqa: E731
    else:
        fn = lambda: gemv_batched_naive(cfg.mode, A, x)  # noqa: E731
    for _ in range(cfg.cold_iters):
        fn()
    times = []
    for _ in range(max(cfg.iters, 1)):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    mean = float(np.mean(times))
    return {
        "M": cfg.M, "N": cfg.N, "batch_count": cfg.batch_count, "transA": cfg.transA,
        "function": cfg.rocblas_function, "kernel": kernel.value,
        "mean_s": mean, "min_s": min(times), "max_s": max(times),
        "gbytes_per_s": effective_bandwidth(cfg.M, cfg.N, cfg.batch_count, dt.itemsize, mean),
    }
