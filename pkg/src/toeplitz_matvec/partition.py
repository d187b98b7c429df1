"""In-process simulation of the 1 x p column-partitioned matvec.

Worker ``w`` owns a contiguous range of parameter columns. The forward
product then needs one reduction of full-length partial data vectors, and
the adjoint needs one broadcast of the data vector; nothing else is
communicated. The precision of the reduction follows phase 5 of the config
and the precision of the broadcast follows phase 1.

Workers may run on a thread pool, but every combination step happens in a
fixed order, so results never depend on scheduling.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import BlockVector, Domain, Layout, Precision, PrecisionConfig, cast_buffer
from .pipeline import (
    BlockColumn,
    PhaseTimings,
    SpectralOperator,
    _as_config,
    adjoint_matvec,
    forward_matvec,
    setup_operator,
)

__all__ = [
    "Grid1xP",
    "CommSpec",
    "shard_operator",
    "setup_shards",
    "tree_reduce",
    "forward_matvec_partitioned",
    "adjoint_matvec_partitioned",
]


@dataclass(frozen=True)
class Grid1xP:
    p: int
    n_m: int

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.p > self.n_m:
            raise ValueError(f"cannot split {self.n_m} parameter columns over {self.p} workers")

    @property
    def shard_ranges(self) -> list[tuple[int, int]]:
        """Balanced contiguous ranges; the first ``n_m % p`` get one extra column."""
        base, extra = divmod(self.n_m, self.p)
        out, start = [], 0
        for w in range(self.p):
            size = base + (w < extra)
            out.append((start, start + size))
            start += size
        return out


@dataclass(frozen=True)
class CommSpec:
    op: str  # "reduce" or "broadcast"
    precision: Precision
    buffer_len: int

    @classmethod
    def for_config(cls, kind: str, cfg: PrecisionConfig, n_d: int, n_t: int) -> "CommSpec":
        if kind == "forward":
            return cls("reduce", cfg[4], n_d * n_t)
        return cls("broadcast", cfg[0], n_d * n_t)


def shard_operator(col: BlockColumn, grid: Grid1xP) -> list[BlockColumn]:
    if grid.n_m != col.dims.n_m:
        raise ValueError(f"grid covers {grid.n_m} columns, operator has {col.dims.n_m}")
    return [BlockColumn(np.ascontiguousarray(col.blocks[:, :, a:b])) for a, b in grid.shard_ranges]


def setup_shards(shards) -> list[SpectralOperator]:
    return [s if isinstance(s, SpectralOperator) else setup_operator(s) for s in shards]


def tree_reduce(buffers, precision: Precision) -> np.ndarray:
    """Sum equal-length buffers over a fixed left-balanced binary tree.

    Inputs are cast to ``precision`` first and every partial sum stays in
    that precision; only the root is widened to double.
    """
    buffers = [np.asarray(b) for b in buffers]
    if not buffers:
        raise ValueError("need at least one buffer")
    n = buffers[0].shape
    if any(b.shape != n for b in buffers):
        raise ValueError("all buffers must have the same length")
    dt = precision.real_dtype
    leaves = [b.astype(dt) for b in buffers]

    def _sum(lo, hi):
        if hi - lo == 1:
            return leaves[lo]
        mid = lo + (hi - lo + 1) // 2
        return _sum(lo, mid) + _sum(mid, hi)

    return _sum(0, len(leaves)).astype(np.float64)


def _map(fn, items, n_jobs):
    if n_jobs is None or n_jobs <= 1 or len(items) == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))


def _combine_timings(worker_timings, comm_phase: int, comm_s: float, total: float) -> PhaseTimings:
    tm = PhaseTimings()
    tm.phases = [max(t.phases[i] for t in worker_timings) for i in range(5)]
    tm.phases[comm_phase] += comm_s
    tm.total = total
    tm.casts = sum(t.casts for t in worker_timings)
    tm.kernel = ",".join(sorted({t.kernel for t in worker_timings}))
    return tm


def forward_matvec_partitioned(shards, m: BlockVector, cfg, grid: Grid1xP,
                               n_jobs: int | None = None, **matvec_kw):
    """``d = F m`` with the operator split over ``grid.p`` workers.

    Each worker runs phases 1-4 and the unpad on its column shard, giving a
    full-length partial data vector rounded to the phase-5 precision; the
    partials are then tree-reduced in that precision. Per-phase timings are
    the maximum over workers, as if they ran concurrently, with the
    reduction charged to phase 5.
    """
    cfg = _as_config(cfg)
    ops = setup_shards(shards)
    if len(ops) != grid.p:
        raise ValueError(f"got {len(ops)} shards for p={grid.p}")
    t_begin = time.perf_counter()
    mst = m.space_time()
    if mst.shape[0] != grid.n_m:
        raise ValueError(f"m has {mst.shape[0]} parameter series, grid expects {grid.n_m}")

    def work(args):
        op, (a, b) = args
        local = BlockVector.from_space_time(mst[a:b], Layout.SOTI)
        return forward_matvec(op, local, cfg, **matvec_kw)

    outs = _map(work, list(zip(ops, grid.shard_ranges)), n_jobs)
    t = time.perf_counter()
    d = tree_reduce([o.data for o, _ in outs], cfg[4])
    comm = time.perf_counter() - t
    n_d, n_t = outs[0][0].space_extent, outs[0][0].time_extent
    vec = BlockVector(d, n_d, n_t, Layout.SOTI, Domain.TIME)
    return vec, _combine_timings([tm for _, tm in outs], 4, comm, time.perf_counter() - t_begin)


def adjoint_matvec_partitioned(shards, d: BlockVector, cfg, grid: Grid1xP,
                               n_jobs: int | None = None, **matvec_kw):
    """``m = F* d`` with the operator split over ``grid.p`` workers.

    ``d`` is rounded to the phase-1 precision once, as the broadcast
    payload, and every worker starts from that same payload. Parameter
    shards are concatenated; there is no reduction.
    """
    cfg = _as_config(cfg)
    ops = setup_shards(shards)
    if len(ops) != grid.p:
        raise ValueError(f"got {len(ops)} shards for p={grid.p}")
    t_begin = time.perf_counter()
    t = time.perf_counter()
    payload = cast_buffer(d.data, Precision.DOUBLE, cfg[0])
    # widening back is exact; the pipeline re-rounds to cfg[0] bit-identically
    received = BlockVector(payload.astype(np.float64), d.space_extent, d.time_extent,
                           d.layout, d.domain)
    comm = time.perf_counter() - t

    outs = _map(lambda op: adjoint_matvec(op, received, cfg, **matvec_kw), ops, n_jobs)
    m = np.concatenate([o.space_time() for o, _ in outs], axis=0)
    if m.shape[0] != grid.n_m:
        raise ValueError("shards do not cover the grid")
    vec = BlockVector.from_space_time(m, Layout.SOTI)
    return vec, _combine_timings([tm for _, tm in outs], 0, comm, time.perf_counter() - t_begin)
