import math

import numpy as np
import pytest

from conftest import random_problem, rel
from toeplitz_matvec.core import BlockVector, Precision, PrecisionConfig
from toeplitz_matvec.partition import (
    CommSpec,
    Grid1xP,
    adjoint_matvec_partitioned,
    forward_matvec_partitioned,
    setup_shards,
    shard_operator,
    tree_reduce,
)
from toeplitz_matvec.pipeline import BlockColumn, adjoint_matvec, forward_matvec, setup_operator
from toeplitz_matvec.preclab import non_representable_fill

S, D = Precision.SINGLE, Precision.DOUBLE


@pytest.mark.parametrize("p, n_m, ranges", [
    (1, 5, [(0, 5)]),
    (2, 4, [(0, 2), (2, 4)]),
    (3, 5, [(0, 2), (2, 4), (4, 5)]),
])
def test_shard_ranges(p, n_m, ranges):
    assert Grid1xP(p, n_m).shard_ranges == ranges


@pytest.mark.parametrize("p, n_m", [(1, 1), (4, 13), (7, 7), (16, 64)])
def test_shard_ranges_partition(p, n_m):
    r = Grid1xP(p, n_m).shard_ranges
    sizes = [b - a for a, b in r]
    assert r[0][0] == 0 and r[-1][1] == n_m
    assert all(r[i][1] == r[i + 1][0] for i in range(p - 1))
    assert max(sizes) - min(sizes) <= 1


def test_grid_errors():
    with pytest.raises(ValueError):
        Grid1xP(0, 3)
    with pytest.raises(ValueError):
        Grid1xP(4, 3)


def test_shards_reassemble(rng):
    col, _, _ = random_problem(rng, 5, 2, 3)
    shards = shard_operator(col, Grid1xP(3, 5))
    assert [s.blocks.shape[2] for s in shards] == [2, 2, 1]
    assert np.concatenate([s.blocks for s in shards], axis=2).tobytes() == col.blocks.tobytes()
    with pytest.raises(ValueError):
        shard_operator(col, Grid1xP(2, 4))


def test_comm_spec():
    cfg = PrecisionConfig.parse("sddds")
    assert CommSpec.for_config("forward", cfg, 4, 32) == CommSpec("reduce", S, 128)
    assert CommSpec.for_config("adjoint", PrecisionConfig.parse("dddds"), 4, 32).precision is D


def test_tree_reduce_examples(rng):
    x = rng.standard_normal(10)
    assert tree_reduce([x], D).tobytes() == x.tobytes()
    assert np.array_equal(tree_reduce([x], S), x.astype(np.float32).astype(np.float64))
    bufs = [np.full(3, float(v)) for v in (1, 2, 3, 4)]
    assert tree_reduce(bufs, D).tolist() == [10.0] * 3
    with pytest.raises(ValueError):
        tree_reduce([np.zeros(3), np.zeros(4)], D)
    with pytest.raises(ValueError):
        tree_reduce([], D)


def test_tree_reduce_order():
    # ((a + b) + c) with a left-balanced split of 3 is (a + b) + c
    a, b, c = np.array([1e16]), np.array([1.0]), np.array([-1e16])
    assert tree_reduce([a, b, c], D)[0] == (1e16 + 1.0) + -1e16


def test_tree_reduce_accuracy(rng):
    bufs = [rng.standard_normal(1000) for _ in range(8)]
    exact = np.array([math.fsum(col) for col in zip(*bufs)])
    dbl = tree_reduce(bufs, D)
    assert rel(dbl, exact) <= 1e-13
    assert rel(tree_reduce(bufs, S), dbl) <= 1e-4
    assert tree_reduce(bufs, D).tobytes() == dbl.tobytes()


@pytest.fixture(scope="module")
def problem():
    rng = np.random.default_rng(5)
    n_m, n_d, n_t = 16, 3, 12
    col = BlockColumn(rng.standard_normal((n_t, n_d, n_m)))
    m = BlockVector(rng.standard_normal(n_m * n_t), n_m, n_t)
    d = BlockVector(rng.standard_normal(n_d * n_t), n_d, n_t)
    return col, m, d, setup_operator(col)


def test_p1_bitwise(problem):
    col, m, d, op = problem
    g = Grid1xP(1, 16)
    shards = setup_shards(shard_operator(col, g))
    for cfg in ("ddddd", "dssds"):
        assert forward_matvec_partitioned(shards, m, cfg, g)[0].bitwise_equal(
            forward_matvec(op, m, cfg)[0])
        assert adjoint_matvec_partitioned(shards, d, cfg, g)[0].bitwise_equal(
            adjoint_matvec(op, d, cfg)[0])


@pytest.mark.parametrize("p", [2, 3, 4, 8, 16])
def test_double_equivalence_and_adjointness(problem, p):
    col, m, d, op = problem
    g = Grid1xP(p, 16)
    shards = setup_shards(shard_operator(col, g))
    fwd = forward_matvec_partitioned(shards, m, "ddddd", g)[0].data
    adj = adjoint_matvec_partitioned(shards, d, "ddddd", g)[0].data
    assert rel(fwd, forward_matvec(op, m)[0].data) <= 1e-12
    assert rel(adj, adjoint_matvec(op, d)[0].data) <= 1e-12
    lhs, rhs = fwd @ d.data, m.data @ adj
    assert abs(lhs - rhs) <= 1e-11 * abs(lhs)


def test_schedule_independent(problem):
    col, m, d, _ = problem
    g = Grid1xP(4, 16)
    shards = setup_shards(shard_operator(col, g))
    a = forward_matvec_partitioned(shards, m, "dddds", g, n_jobs=1)[0]
    b = forward_matvec_partitioned(shards, m, "dddds", g, n_jobs=4)[0]
    assert a.bitwise_equal(b)
    assert adjoint_matvec_partitioned(shards, d, "sdsdd", g, n_jobs=1)[0].bitwise_equal(
        adjoint_matvec_partitioned(shards, d, "sdsdd", g, n_jobs=4)[0])


def test_single_reduce_error_bounded():
    n_m, n_d, n_t = 16, 3, 12
    col = BlockColumn(non_representable_fill(n_t * n_d * n_m, 11).reshape(n_t, n_d, n_m))
    m = BlockVector(non_representable_fill(n_m * n_t, 12), n_m, n_t)
    g = Grid1xP(8, n_m)
    shards = setup_shards(shard_operator(col, g))
    ref = forward_matvec_partitioned(shards, m, "ddddd", g)[0].data
    err = rel(forward_matvec_partitioned(shards, m, "dddds", g)[0].data, ref)
    assert 0 < err <= 1e-4


@pytest.mark.parametrize("p", [1, 2, 4, 8])
def test_broadcast_error_independent_of_p(problem, p):
    col, _, _, op = problem
    d = BlockVector(non_representable_fill(36, 4), 3, 12)
    serial_ref = adjoint_matvec(op, d)[0].data
    serial_err = rel(adjoint_matvec(op, d, "sdddd")[0].data, serial_ref)
    g = Grid1xP(p, 16)
    shards = setup_shards(shard_operator(col, g))
    part_ref = adjoint_matvec_partitioned(shards, d, "ddddd", g)[0].data
    part = adjoint_matvec_partitioned(shards, d, "sdddd", g)[0].data
    assert serial_err > 0
    assert rel(part, part_ref) == serial_err


def test_partition_timings(problem):
    col, m, _, _ = problem
    g = Grid1xP(2, 16)
    _, tm = forward_matvec_partitioned(setup_shards(shard_operator(col, g)), m, "ddddd", g)
    assert len(tm.phases) == 5 and tm.total > 0 and tm.casts == 0
