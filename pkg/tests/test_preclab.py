import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_problem
from toeplitz_matvec.core import BlockVector, PrecisionConfig, enumerate_configs, parse_precision_config
from toeplitz_matvec.pipeline import BlockColumn, setup_operator
from toeplitz_matvec.preclab import (
    LOW_BITS_MASK,
    ConfigResult,
    SweepReport,
    non_representable_fill,
    optimal_config,
    pareto_front,
    relative_error,
    results_from_csv,
    run_sweep,
    sweep_configs,
)

CONFIGS = enumerate_configs()


def dominates(r, q):
    return (r.mean_s <= q.mean_s and r.rel_error <= q.rel_error
            and (r.mean_s < q.mean_s or r.rel_error < q.rel_error))


def brute_front(results):
    return {id(q) for q in results if not any(dominates(r, q) for r in results)}


def brute_optimal(results, tol):
    best = None
    for r in results:
        if r.rel_error > tol:
            continue
        key = (r.mean_s, r.rel_error, str(r.config))
        if best is None or key < best[0]:
            best = (key, r.config)
    return best[1]


def synthetic(rng, n=32, ties=False):
    out = []
    for i in range(n):
        cfg = CONFIGS[i % 32]
        t = float(rng.integers(1, 6)) if ties else float(rng.uniform(0.1, 2.0))
        e = 0.0 if cfg.is_all_double else (float(rng.integers(0, 4)) * 1e-8 if ties
                                           else float(10 ** rng.uniform(-9, -5)))
        out.append(ConfigResult(cfg, t, t * 0.9, t * 1.1, e))
    return out


def test_fill_deterministic_and_in_range():
    a = non_representable_fill(1000, 7)
    assert a.tobytes() == non_representable_fill(1000, 7).tobytes()
    assert a.tobytes() != non_representable_fill(1000, 8).tobytes()
    assert np.all((np.abs(a) >= 0.5) & (np.abs(a) < 1))
    assert np.all((a.view(np.uint64) & LOW_BITS_MASK) == LOW_BITS_MASK)
    assert 0.4 < np.mean(a < 0) < 0.6


def test_fill_never_survives_single_roundtrip():
    a = non_representable_fill(10**6, 99)
    assert np.all(a.astype(np.float32).astype(np.float64) != a)


def test_fill_quarter_example():
    x = (np.array([0.75]).view(np.uint64) | LOW_BITS_MASK).view(np.float64)[0]
    delta = abs(float(np.float32(x)) - x)
    assert 0 < delta <= 2.0**-24


def test_fill_rejects_empty():
    with pytest.raises(ValueError):
        non_representable_fill(0, 1)


def test_relative_error_examples(rng):
    ref = rng.standard_normal(9)
    assert relative_error(ref, ref) == 0
    assert relative_error(2 * ref, ref) == pytest.approx(1.0, rel=1e-15)
    unit = ref / np.linalg.norm(ref)
    eps = 1e-9
    x = unit.copy()
    x[0] += eps
    assert abs(relative_error(x, unit) - eps) <= 1e-15
    with pytest.raises(ValueError):
        relative_error(ref, np.zeros(9))
    with pytest.raises(ValueError):
        relative_error(ref[:3], ref)


def test_pareto_examples():
    a = ConfigResult(CONFIGS[0], 1.0, 1.0, 1.0, 1e-9)
    b = ConfigResult(CONFIGS[1], 2.0, 2.0, 2.0, 1e-8)
    assert pareto_front([a]) == [a]
    assert pareto_front([b, a]) == [a]


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32), st.booleans(), st.integers(1, 40))
def test_pareto_matches_pairwise_oracle(seed, ties, n):
    res = synthetic(np.random.default_rng(seed), n, ties)
    front = pareto_front(res)
    assert {id(r) for r in front} == brute_front(res)
    assert [r.mean_s for r in front] == sorted(r.mean_s for r in front)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32), st.booleans(), st.floats(0, 1e-5))
def test_optimal_matches_scan_and_lies_on_front(seed, ties, tol):
    res = synthetic(np.random.default_rng(seed), 32, ties)
    best = optimal_config(res, tol)
    assert best == brute_optimal(res, tol)
    assert any(r.config == best for r in pareto_front(res))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.floats(0, 1e-5), st.floats(0, 1e-5))
def test_optimal_monotone_in_tolerance(seed, t1, t2):
    t1, t2 = sorted((t1, t2))
    res = synthetic(np.random.default_rng(seed))
    speed = {r.config: r.mean_s for r in res}
    assert speed[optimal_config(res, t1)] >= speed[optimal_config(res, t2)]


def test_optimal_examples():
    res = [ConfigResult(c, 1.0 + i, 1.0, 1.0, 0.0 if c.is_all_double else 1e-3)
           for i, c in enumerate(CONFIGS)]
    assert str(optimal_config(res, 0.0)) == "ddddd"
    fast = parse_precision_config("dssdd")
    res = [ConfigResult(r.config, 0.5, 0.5, 0.5, 3e-8) if r.config == fast else r for r in res]
    assert str(optimal_config(res, 1e-7)) == "dssdd"
    with pytest.raises(ValueError):
        optimal_config([r for r in res if not r.config.is_all_double], 0.0)


def test_optimal_tie_breaks():
    a = ConfigResult(parse_precision_config("sdddd"), 1.0, 1, 1, 1e-8)
    b = ConfigResult(parse_precision_config("dsddd"), 1.0, 1, 1, 1e-8)
    c = ConfigResult(parse_precision_config("ddsdd"), 1.0, 1, 1, 2e-8)
    assert str(optimal_config([c, a, b], 1e-7)) == "dsddd"


@pytest.fixture(scope="module")
def small_sweep():
    n_m, n_d, n_t = 8, 3, 12
    col = BlockColumn(non_representable_fill(n_t * n_d * n_m, 1).reshape(n_t, n_d, n_m))
    m = BlockVector(non_representable_fill(n_m * n_t, 2), n_m, n_t)
    op = setup_operator(col)
    return op, m, sweep_configs(op, m, repetitions=2, warmup=1)


def test_sweep_rows(small_sweep):
    _, _, res = small_sweep
    assert [r.config for r in res] == CONFIGS
    for r in res:
        assert r.min_s <= r.mean_s <= r.max_s
        assert (r.rel_error == 0) == r.config.is_all_double
    assert {id(r) for r in pareto_front(res)} == brute_front(res)


def test_sweep_errors_reproducible(small_sweep):
    op, m, res = small_sweep
    again = sweep_configs(op, m, repetitions=1, warmup=0)
    assert [r.rel_error for r in again] == [r.rel_error for r in res]


def test_sweep_adjoint_and_validation(rng):
    col, _, d = random_problem(rng, 5, 2, 4)
    op = setup_operator(col)
    cfgs = [PrecisionConfig.all_double(), parse_precision_config("ssdss")]
    res = sweep_configs(op, d, "adjoint", 1, 0, configs=cfgs)
    assert res[0].rel_error == 0 and res[1].rel_error > 0
    with pytest.raises(ValueError):
        sweep_configs(op, d, "adjoint", 0)
    with pytest.raises(ValueError):
        sweep_configs(op, d, "sideways", 1)


def test_report_serialization(small_sweep):
    op, m, _ = small_sweep
    rep = run_sweep(op, m, repetitions=1, warmup=0, tol=1e-5)
    assert isinstance(rep, SweepReport) and len(rep.results) == 32
    assert rep.baseline.rel_error == 0
    assert any(r.config == rep.chosen for r in rep.results)
    back = SweepReport.from_json(rep.to_json())
    assert back.results == rep.results and back.chosen == rep.chosen
    assert results_from_csv(rep.to_csv()) == rep.results
    assert rep.to_csv().splitlines()[0] == "config,mean_s,min_s,max_s,rel_error"
