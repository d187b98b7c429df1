"""Dense brute-force forward and adjoint products for small instances.

Sums run in double over time blocks in ascending order so results are
reproducible. Nothing here touches an FFT.
"""

import numpy as np

from .core import BlockVector, Layout
from .pipeline import BlockColumn

MAX_WORK = 10**8


def _guard(col):
    d = col.dims
    work = d.n_d * d.n_m * d.n_t**2
    if work > MAX_WORK:
        raise ValueError(f"dense oracle refuses n_d*n_m*n_t^2 = {work} > {MAX_WORK}")


def dense_forward(col: BlockColumn, m: BlockVector) -> BlockVector:
    """d_i = sum_{j<=i} F_{i-j+1,1} m_j, returned as a SOTI double vector."""
    _guard(col)
    d = col.dims
    mt = np.asarray(m.space_time(), dtype=np.float64).T  # (n_t, n_m)
    if mt.shape != (d.n_t, d.n_m):
        raise ValueError(f"m must be {d.n_m} x {d.n_t}")
    out = np.zeros((d.n_t, d.n_d))
    for i in range(d.n_t):
        acc = np.zeros(d.n_d)
        for j in range(i + 1):
            acc += col.blocks[i - j] @ mt[j]
        out[i] = acc
    return BlockVector.from_space_time(out.T, Layout.SOTI)


def dense_adjoint(col: BlockColumn, dvec: BlockVector) -> BlockVector:
    """m_j = sum_{i>=j} F_{i-j+1,1}^T d_i, returned as a SOTI double vector."""
    _guard(col)
    d = col.dims
    dt = np.asarray(dvec.space_time(), dtype=np.float64).T  # (n_t, n_d)
    if dt.shape != (d.n_t, d.n_d):
        raise ValueError(f"d must be {d.n_d} x {d.n_t}")
    out = np.zeros((d.n_t, d.n_m))
    for j in range(d.n_t):
        acc = np.zeros(d.n_m)
        for i in range(j, d.n_t):
            acc += col.blocks[i - j].T @ dt[i]
        out[j] = acc
    return BlockVector.from_space_time(out.T, Layout.SOTI)


def assemble_dense(col: BlockColumn) -> np.ndarray:
    """Full (n_d*n_t) x (n_m*n_t) lower block-triangular matrix, time-blocked ordering."""
    _guard(col)
    d = col.dims
    big = np.zeros((d.n_d * d.n_t, d.n_m * d.n_t))
    for i in range(d.n_t):
        for j in range(i + 1):
            big[i * d.n_d:(i + 1) * d.n_d, j * d.n_m:(j + 1) * d.n_m] = col.blocks[i - j]
    return big
