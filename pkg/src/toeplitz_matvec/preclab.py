"""Mixed-precision experiments: sweep all 32 configs, Pareto front, selection.

Random inputs come from :func:`non_representable_fill`, which uses numpy's
PCG64 generator (``numpy.random.default_rng(seed)``) and then forces the 29
low significand bits of every double to one. No such value survives a
round trip through float32, so every single-precision phase is guaranteed
to perturb the result.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .core import BlockVector, Precision, PrecisionConfig, enumerate_configs, parse_precision_config
from .pipeline import SpectralOperator, adjoint_matvec, forward_matvec, materialize_single

__all__ = [
    "LOW_BITS_MASK",
    "ConfigResult",
    "SweepReport",
    "non_representable_fill",
    "relative_error",
    "sweep_configs",
    "pareto_front",
    "optimal_config",
    "run_sweep",
]

# significand bits below float32's 23-bit mantissa (52 - 23 = 29)
LOW_BITS_MASK = np.uint64((1 << 29) - 1)
_SIGN_BIT = np.uint64(1 << 63)


def non_representable_fill(count: int, seed: int) -> np.ndarray:
    """``count`` doubles with |x| in [0.5, 1), random sign, low 29 bits set."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    mag = 0.5 + 0.5 * rng.random(count)
    bits = mag.view(np.uint64) | LOW_BITS_MASK
    neg = rng.integers(0, 2, size=count, dtype=np.uint64).astype(bool)
    bits[neg] |= _SIGN_BIT
    return bits.view(np.float64)


def relative_error(x, ref) -> float:
    """``||x - ref||_2 / ||ref||_2`` in double."""
    x = np.asarray(x, dtype=np.float64).ravel()
    ref = np.asarray(ref, dtype=np.float64).ravel()
    if x.shape != ref.shape:
        raise ValueError(f"length mismatch: {x.size} vs {ref.size}")
    nref = np.linalg.norm(ref)
    if nref == 0:
        raise ValueError("reference vector has zero norm")
    return float(np.linalg.norm(x - ref) / nref)


@dataclass(frozen=True)
class ConfigResult:
    config: PrecisionConfig
    mean_s: float
    min_s: float
    max_s: float
    rel_error: float

    def row(self) -> dict:
        return {"config": str(self.config), "mean_s": self.mean_s, "min_s": self.min_s,
                "max_s": self.max_s, "rel_error": self.rel_error}


CSV_FIELDS = ("config", "mean_s", "min_s", "max_s", "rel_error")


@dataclass
class SweepReport:
    dims: tuple
    kind: str
    repetitions: int
    warmup: int
    tol: float
    results: list = field(default_factory=list)
    chosen: PrecisionConfig | None = None

    @property
    def baseline(self) -> ConfigResult:
        return next(r for r in self.results if r.config.is_all_double)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in self.results:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.row().items()})
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "dims": list(self.dims), "kind": self.kind, "repetitions": self.repetitions,
            "warmup": self.warmup, "tol": self.tol,
            "chosen": str(self.chosen) if self.chosen else None,
            "results": [r.row() for r in self.results],
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SweepReport":
        raw = json.loads(text)
        return cls(
            dims=tuple(raw["dims"]), kind=raw["kind"], repetitions=raw["repetitions"],
            warmup=raw["warmup"], tol=raw["tol"], results=parse_results(raw["results"]),
            chosen=parse_precision_config(raw["chosen"]) if raw["chosen"] else None,
        )


def parse_results(rows) -> list[ConfigResult]:
    return [ConfigResult(parse_precision_config(r["config"]), float(r["mean_s"]),
                         float(r["min_s"]), float(r["max_s"]), float(r["rel_error"]))
            for r in rows]


def results_from_csv(text: str) -> list[ConfigResult]:
    return parse_results(csv.DictReader(io.StringIO(text)))


def sweep_configs(op, vec: BlockVector, kind: str = "forward",
                  repetitions: int = 100, warmup: int = 2,
                  configs=None, matvec=None, **matvec_kw) -> list[ConfigResult]:
    """Time every configuration and measure its error against ``ddddd``.

    Configurations run one after another; each gets ``warmup`` untimed
    calls followed by ``repetitions`` timed ones. Timings are wall-clock
    around the whole matvec.

    ``matvec(op, vec, cfg, **matvec_kw)`` overrides the serial pipeline
    call, e.g. with a partitioned matvec where ``op`` is a list of shards.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if kind not in ("forward", "adjoint"):
        raise ValueError(f"kind must be 'forward' or 'adjoint', got {kind!r}")
    if matvec is None:
        matvec = forward_matvec if kind == "forward" else adjoint_matvec
    configs = list(configs) if configs is not None else enumerate_configs()
    if any(c[2] is Precision.SINGLE for c in configs):
        for o in (op if isinstance(op, (list, tuple)) else [op]):
            if isinstance(o, SpectralOperator):
                materialize_single(o)

    base_cfg = PrecisionConfig.all_double()
    baseline, _ = matvec(op, vec, base_cfg, **matvec_kw)
    results = []
    for cfg in configs:
        for _ in range(warmup):
            matvec(op, vec, cfg, **matvec_kw)
        times = []
        out = None
        for _ in range(repetitions):
            t0 = time.perf_counter()
            out, _ = matvec(op, vec, cfg, **matvec_kw)
            times.append(time.perf_counter() - t0)
        err = relative_error(out.data, baseline.data)
        results.append(ConfigResult(cfg, float(np.mean(times)), min(times), max(times), err))
    return results


def pareto_front(results) -> list[ConfigResult]:
    """Results not dominated in (mean_s, rel_error), sorted by mean_s.

    ``r`` dominates ``q`` when it is no worse on both axes and strictly
    better on one. Exact duplicates do not dominate each other.
    """
    results = list(results)
    if not results:
        raise ValueError("need at least one result")
    ordered = sorted(results, key=lambda r: (r.mean_s, r.rel_error))
    front = []
    best_prev = np.inf
    i = 0
    while i < len(ordered):
        j = i
        while j < len(ordered) and ordered[j].mean_s == ordered[i].mean_s:
            j += 1
        group_min = ordered[i].rel_error
        if group_min < best_prev:
            front.extend(r for r in ordered[i:j] if r.rel_error == group_min)
            best_prev = group_min
        i = j
    return front


def optimal_config(results, tol: float) -> PrecisionConfig:
    """Fastest configuration whose error is at most ``tol``.

    Ties go to the lower error, then to the lexicographically smaller
    config string.
    """
    if tol < 0:
        raise ValueError("tol must be non-negative")
    ok = [r for r in results if r.rel_error <= tol]
    if not ok:
        raise ValueError(f"no configuration meets tolerance {tol}")
    return min(ok, key=lambda r: (r.mean_s, r.rel_error, str(r.config))).config


def run_sweep(op: SpectralOperator, vec: BlockVector, kind: str = "forward",
              repetitions: int = 100, warmup: int = 2, tol: float = 1e-7,
              **matvec_kw) -> SweepReport:
    results = sweep_configs(op, vec, kind, repetitions, warmup, **matvec_kw)
    d = op.dims
    return SweepReport((d.n_m, d.n_d, d.n_t), kind, repetitions, warmup, tol,
                       results, optimal_config(results, tol))
