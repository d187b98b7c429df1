"""Five-phase FFT matvec with the block lower-triangular Toeplitz operator.

The operator is stored as its first block column. Zero padding each scalar
time series of that column to ``2 * n_t`` embeds the Toeplitz operator in a
block circulant one, which the real FFT block-diagonalizes into ``n_t + 1``
complex ``n_d x n_m`` matrices (one per frequency bin).

Forward product ``d = F m``:

1. zero-pad the ``n_m`` series of ``m`` to length ``2 n_t``
2. batched real FFT
3. reorder to bin-major, one GEMV per bin, reorder back
4. batched inverse real FFT of the ``n_d`` output series
5. keep the first ``n_t`` samples

The adjoint is the same with a conjugate-transpose GEMV and the roles of
``m`` and ``d`` swapped.

Each phase runs in the precision chosen by a :class:`PrecisionConfig`.
The working precision starts and ends in double; a conversion happens only
where consecutive phase precisions differ, and it is folded into the
adjacent memory pass (pad, reorder, unpad) wherever one exists.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .core import (
    BlockVector,
    Domain,
    Layout,
    PHASE_NAMES,
    Precision,
    PrecisionConfig,
    ProblemDims,
    cast_buffer,
    cast_counter,
)
from .kernels import (
    GemvMode,
    KernelChoice,
    MatrixBatch,
    TilingParams,
    gemv_batched_naive,
    gemv_batched_tiled,
    select_kernel,
)
from .spectral import Direction, FftPlan, forward_real_batched, inverse_real_batched

__all__ = [
    "BlockColumn",
    "SpectralOperator",
    "PhaseTimings",
    "setup_operator",
    "materialize_single",
    "forward_matvec",
    "adjoint_matvec",
]

_D = Precision.DOUBLE


@dataclass(frozen=True, eq=False)
class BlockColumn:
    """First block column: ``blocks[i]`` is the ``n_d x n_m`` block F_{i+1,1}."""

    blocks: np.ndarray  # (n_t, n_d, n_m) float64

    def __post_init__(self):
        b = self.blocks
        if b.ndim != 3:
            raise ValueError("blocks must have shape (n_t, n_d, n_m)")
        if b.dtype != np.float64:
            raise TypeError(f"block column must be float64, got {b.dtype}")
        ProblemDims(b.shape[2], b.shape[1], b.shape[0])

    @property
    def dims(self) -> ProblemDims:
        n_t, n_d, n_m = self.blocks.shape
        return ProblemDims(n_m=n_m, n_d=n_d, n_t=n_t)


@dataclass(eq=False)
class SpectralOperator:
    """Per-bin matrices of the circulant embedding.

    ``bins_double`` holds ``n_t + 1`` column-major ``n_d x n_m`` complex
    matrices. A single-precision copy is made on demand and then reused.
    """

    bins_double: MatrixBatch
    dims: ProblemDims
    bins_single: MatrixBatch | None = None
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        d = self.dims
        expected = (d.n_bins, d.n_m, d.n_d)
        if self.bins_double.data.shape != expected:
            raise ValueError(f"bins must have shape {expected}, got {self.bins_double.data.shape}")
        if self.bins_double.data.dtype != np.complex128:
            raise TypeError("bins_double must be complex128")

    def bins(self, precision: Precision) -> MatrixBatch:
        if precision is _D:
            return self.bins_double
        return materialize_single(self).bins_single


@dataclass
class PhaseTimings:
    phases: list = field(default_factory=lambda: [0.0] * 5)
    total: float = 0.0
    casts: int = 0
    kernel: str = ""

    @property
    def by_name(self) -> dict:
        return dict(zip(PHASE_NAMES, self.phases))


def setup_operator(col: BlockColumn) -> SpectralOperator:
    """FFT the zero-padded block column in double precision."""
    d = col.dims
    L = d.fft_len
    series = np.zeros((d.n_m * d.n_d, L))
    # series index = j * n_d + i for entry (i, j)
    series[:, :d.n_t] = col.blocks.transpose(2, 1, 0).reshape(d.n_m * d.n_d, d.n_t)
    spec = forward_real_batched(FftPlan(L, d.n_m * d.n_d, _D, Direction.FORWARD), series)
    bins = np.ascontiguousarray(spec.reshape(d.n_m, d.n_d, d.n_bins).transpose(2, 0, 1))
    return SpectralOperator(MatrixBatch(bins), d)


def materialize_single(op: SpectralOperator) -> SpectralOperator:
    """Fill the cached single-precision bins (idempotent) and return ``op``."""
    if op.bins_single is None:
        with op._lock:
            if op.bins_single is None:
                op.bins_single = MatrixBatch(cast_buffer(op.bins_double.data, _D, Precision.SINGLE))
    return op


def _check_input(vec: BlockVector, space: int, n_t: int, what: str):
    if not isinstance(vec, BlockVector):
        raise TypeError(f"{what} must be a BlockVector")
    if vec.domain is not Domain.TIME:
        raise ValueError(f"{what} must be a time-domain vector")
    if vec.layout is not Layout.SOTI:
        raise ValueError(f"{what} must be in SOTI layout")
    if vec.precision is not _D:
        raise TypeError(f"{what} must be double precision, got {vec.data.dtype}")
    if (vec.space_extent, vec.time_extent) != (space, n_t):
        raise ValueError(
            f"{what} has extents {(vec.space_extent, vec.time_extent)}, expected {(space, n_t)}"
        )


def _fused_copy(src: np.ndarray, dtype: np.dtype, conversions: list) -> np.ndarray:
    """Contiguous copy of ``src`` (possibly a transposed view) in ``dtype``, one pass."""
    out = np.empty(src.shape, dtype=dtype)
    out[...] = src
    if src.dtype != dtype:
        conversions[0] += 1
    return out


def _run(op: SpectralOperator, vec: BlockVector, cfg: PrecisionConfig, mode: GemvMode,
         params: TilingParams | None, kernel: KernelChoice | None):
    dims = op.dims
    n_t, L, n_bins = dims.n_t, dims.fft_len, dims.n_bins
    n_in, n_out = (dims.n_m, dims.n_d) if mode is GemvMode.NO_TRANS else (dims.n_d, dims.n_m)
    p = cfg.phases
    conv = [0]
    tm = PhaseTimings()
    clock = time.perf_counter
    t_begin = clock()

    # 1: pad (+ cast to p[0])
    t = clock()
    x = vec.as_2d()
    buf = np.zeros((n_in, L), dtype=p[0].real_dtype)
    buf[:, :n_t] = x
    if p[0] is not _D:
        conv[0] += 1
    tm.phases[0] = clock() - t

    # 2: FFT in p[1]; no memory pass to fuse with, so cast standalone
    t = clock()
    if p[1] is not p[0]:
        buf = buf.astype(p[1].real_dtype)
        conv[0] += 1
    spec = forward_real_batched(FftPlan(L, n_in, p[1], Direction.FORWARD), buf)
    tm.phases[1] = clock() - t

    # 3: SOTI->TOSI (cast fused), per-bin GEMV, TOSI->SOTI (cast fused)
    t = clock()
    xt = _fused_copy(spec.T, p[2].complex_dtype, conv)
    A = op.bins(p[2])
    if kernel is None:
        kernel = select_kernel(A.rows, A.cols, mode, params)
    if kernel is KernelChoice.TILED:
        y = gemv_batched_tiled(mode, A, xt, params=params)
    else:
        y = gemv_batched_naive(mode, A, xt)
    tm.kernel = kernel.value
    ys = _fused_copy(y.T, p[3].complex_dtype, conv)
    tm.phases[2] = clock() - t

    # 4: inverse FFT in p[3]
    t = clock()
    out = inverse_real_batched(FftPlan(L, n_out, p[3], Direction.INVERSE), ys)
    tm.phases[3] = clock() - t

    # 5: truncate, round to p[4], widen back to double
    t = clock()
    res = np.empty((n_out, n_t), dtype=np.float64)
    if p[4] is p[3]:
        res[...] = out[:, :n_t]
    else:
        conv[0] += 1
        res[...] = out[:, :n_t].astype(p[4].real_dtype)
    if p[4] is not _D:
        conv[0] += 1
    tm.phases[4] = clock() - t

    tm.total = clock() - t_begin
    tm.casts = conv[0]
    cast_counter.add(conv[0])
    return BlockVector(res.ravel(), n_out, n_t, Layout.SOTI, Domain.TIME), tm


def forward_matvec(op: SpectralOperator, m: BlockVector, cfg: PrecisionConfig | str = "ddddd",
                   params: TilingParams | None = None,
                   kernel: KernelChoice | None = None) -> tuple[BlockVector, PhaseTimings]:
    """``d = F m`` under precision configuration ``cfg``.

    ``m`` is a double SOTI vector of ``n_m x n_t``; the result is a double
    SOTI vector of ``n_d x n_t``.
    """
    cfg = _as_config(cfg)
    _check_input(m, op.dims.n_m, op.dims.n_t, "m")
    return _run(op, m, cfg, GemvMode.NO_TRANS, params, kernel)


def adjoint_matvec(op: SpectralOperator, d: BlockVector, cfg: PrecisionConfig | str = "ddddd",
                   params: TilingParams | None = None,
                   kernel: KernelChoice | None = None) -> tuple[BlockVector, PhaseTimings]:
    """``m = F* d``; phase 3 uses a conjugate-transpose GEMV.

    The per-bin matrices are short and wide (``n_d << n_m``), so the
    dispatcher normally routes this product to the tiled kernel.
    """
    cfg = _as_config(cfg)
    _check_input(d, op.dims.n_d, op.dims.n_t, "d")
    return _run(op, d, cfg, GemvMode.CONJ_TRANS, params, kernel)


def _as_config(cfg) -> PrecisionConfig:
    if isinstance(cfg, PrecisionConfig):
        return cfg
    return PrecisionConfig.parse(cfg)
