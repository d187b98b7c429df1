"""``fft-matvec`` and ``gemv-bench`` command-line entry points.

``fft-matvec`` builds a synthetic operator, times the forward and adjoint
matvecs phase by phase (or sweeps all 32 precision configurations) and
prints either a table or CSV (``-raw``). ``read_report`` parses that CSV
back.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from dataclasses import dataclass

import numpy as np

from .core import PHASE_NAMES, BlockVector, Layout, PrecisionConfig, PrecisionConfigError, ProblemDims
from .kernels import KernelChoice, TilingParams, read_bench_configs, run_bench
from .partition import (
    Grid1xP,
    adjoint_matvec_partitioned,
    forward_matvec_partitioned,
    shard_operator,
    setup_shards,
)
from .pipeline import BlockColumn, adjoint_matvec, forward_matvec, setup_operator
from .preclab import (
    CSV_FIELDS,
    SweepReport,
    non_representable_fill,
    optimal_config,
    parse_results,
    sweep_configs,
)
from .vecio import load_vector, save_vector  # noqa: F401  (re-exported)

DEFAULT_SEED = 1234
PHASE_CSV_FIELDS = ("matvec", "phase", "mean_s", "min_s", "max_s")


@dataclass
class RunArgs:
    n_m: int = 5000
    n_d: int = 100
    n_t: int = 1000
    prec: str | None = None
    rand: bool = False
    raw: bool = False
    save_dir: str | None = None
    p: int = 1
    reps: int = 100
    warmup: int = 2
    tol: float = 1e-7
    sweep: bool = False
    seed: int = DEFAULT_SEED


# --- problem construction ---------------------------------------------------


def build_problem(dims: ProblemDims, rand: bool, seed: int):
    """Synthetic block column plus one parameter and one data vector.

    With ``rand`` every value is float32-unrepresentable; otherwise values
    are uniform in [-1, 1].
    """
    n_col = dims.n_t * dims.n_d * dims.n_m
    if rand:
        blocks = non_representable_fill(n_col, seed)
        m = non_representable_fill(dims.n_m * dims.n_t, seed + 1)
        d = non_representable_fill(dims.n_d * dims.n_t, seed + 2)
    else:
        rng = np.random.default_rng(seed)
        blocks = rng.uniform(-1.0, 1.0, n_col)
        m = rng.uniform(-1.0, 1.0, dims.n_m * dims.n_t)
        d = rng.uniform(-1.0, 1.0, dims.n_d * dims.n_t)
    col = BlockColumn(blocks.reshape(dims.n_t, dims.n_d, dims.n_m))
    mv = BlockVector(m, dims.n_m, dims.n_t, Layout.SOTI)
    dv = BlockVector(d, dims.n_d, dims.n_t, Layout.SOTI)
    return col, mv, dv


class _Matvecs:
    """Forward/adjoint callables for a serial or 1 x p partitioned run."""

    def __init__(self, col: BlockColumn, p: int):
        self.p = p
        if p == 1:
            self.op = setup_operator(col)
        else:
            self.grid = Grid1xP(p, col.dims.n_m)
            self.op = setup_shards(shard_operator(col, self.grid))

    def forward(self, op, vec, cfg):
        if self.p == 1:
            return forward_matvec(op, vec, cfg)
        return forward_matvec_partitioned(op, vec, cfg, self.grid)

    def adjoint(self, op, vec, cfg):
        if self.p == 1:
            return adjoint_matvec(op, vec, cfg)
        return adjoint_matvec_partitioned(op, vec, cfg, self.grid)


def _time_phases(fn, op, vec, cfg, reps, warmup):
    for _ in range(warmup):
        fn(op, vec, cfg)
    rows = []
    out = None
    for _ in range(reps):
        out, tm = fn(op, vec, cfg)
        rows.append(list(tm.phases) + [tm.total])
    arr = np.asarray(rows)
    return out, arr.mean(axis=0), arr.min(axis=0), arr.max(axis=0)


# --- reports ----------------------------------------------------------------


def _write_phase_csv(stats, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(PHASE_CSV_FIELDS)
    for kind, (mean, lo, hi) in stats.items():
        for i, name in enumerate(list(PHASE_NAMES) + ["total"]):
            w.writerow([kind, name, repr(float(mean[i])), repr(float(lo[i])), repr(float(hi[i]))])


def _write_phase_table(stats, fh, header):
    fh.write(header + "\n")
    for kind, (mean, lo, hi) in stats.items():
        fh.write(f"\n{kind} matvec\n")
        fh.write(f"  {'phase':<8} {'mean (ms)':>12} {'min (ms)':>12} {'max (ms)':>12} {'share':>7}\n")
        for i, name in enumerate(list(PHASE_NAMES) + ["total"]):
            share = mean[i] / mean[5] if mean[5] > 0 else 0.0
            fh.write(f"  {name:<8} {mean[i] * 1e3:12.4f} {lo[i] * 1e3:12.4f} {hi[i] * 1e3:12.4f} "
                     f"{share:7.1%}\n")


def _sweep_meta(report: SweepReport) -> str:
    n_m, n_d, n_t = report.dims
    return (f"# sweep matvec={report.kind} n_m={n_m} n_d={n_d} n_t={n_t} "
            f"reps={report.repetitions} warmup={report.warmup} tol={report.tol!r} "
            f"chosen={report.chosen}")


def _write_sweep_table(report: SweepReport, fh):
    base = report.baseline.mean_s
    chosen = str(report.chosen)
    fh.write(f"\n{report.kind} sweep (tol {report.tol:g}, chosen {chosen})\n")
    fh.write(f"  {'config':<7} {'mean (ms)':>11} {'min (ms)':>11} {'max (ms)':>11} "
             f"{'speedup':>8} {'rel err':>11}\n")
    for r in report.results:
        mark = " *" if str(r.config) == chosen else ""
        fh.write(f"  {str(r.config):<7} {r.mean_s * 1e3:11.4f} {r.min_s * 1e3:11.4f} "
                 f"{r.max_s * 1e3:11.4f} {base / r.mean_s:8.3f} {r.rel_error:11.3e}{mark}\n")


def read_report(text: str) -> dict:
    """Parse ``-raw`` output.

    Returns ``{"phases": [row dicts]}`` for a timing run or
    ``{"sweeps": {kind: SweepReport}}`` for a sweep.
    """
    lines = text.splitlines()
    if lines and lines[0] == ",".join(PHASE_CSV_FIELDS):
        rows = []
        for r in csv.DictReader(io.StringIO(text)):
            rows.append({"matvec": r["matvec"], "phase": r["phase"],
                         **{k: float(r[k]) for k in ("mean_s", "min_s", "max_s")}})
        return {"phases": rows}

    sweeps, meta, block = {}, None, []

    def flush():
        if meta is None:
            return
        if not block or tuple(block[0].split(",")) != CSV_FIELDS:
            raise ValueError(f"sweep block for {meta.get('matvec')} lacks the CSV header")
        results = parse_results(csv.DictReader(io.StringIO("\n".join(block))))
        chosen = meta["chosen"]
        sweeps[meta["matvec"]] = SweepReport(
            (int(meta["n_m"]), int(meta["n_d"]), int(meta["n_t"])), meta["matvec"],
            int(meta["reps"]), int(meta["warmup"]), float(meta["tol"]), results,
            PrecisionConfig.parse(chosen) if chosen != "None" else None)

    for line in lines:
        if line.startswith("# sweep"):
            flush()
            meta = dict(tok.split("=", 1) for tok in line.split()[2:])
            block = []
        elif line.strip():
            block.append(line)
    flush()
    if not sweeps:
        raise ValueError("unrecognized report format")
    return {"sweeps": sweeps}


# --- entry points -----------------------------------------------------------


def _positive_int(s):
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s!r}")
    return v


def _non_negative_int(s):
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {s!r}")
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {s!r}")
    return v


def _tolerance(s):
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {s!r}")
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"tolerance must be >= 0, got {s!r}")
    return v


def _prec(s):
    try:
        PrecisionConfig.parse(s)
    except PrecisionConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc))
    return s


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fft-matvec", allow_abbrev=False,
        description="Time FFT-based block-Toeplitz matvecs under per-phase precision configs.")
    d = RunArgs()
    ap.add_argument("-nm", dest="n_m", type=_positive_int, default=d.n_m, help="spatial parameters")
    ap.add_argument("-nd", dest="n_d", type=_positive_int, default=d.n_d, help="sensors")
    ap.add_argument("-Nt", dest="n_t", type=_positive_int, default=d.n_t, help="time steps")
    ap.add_argument("-prec", type=_prec, default=None,
                    help="5 chars of d/s: pad, fft, sbgemv, ifft, unpad (default ddddd)")
    ap.add_argument("-rand", action="store_true", help="float32-unrepresentable random init")
    ap.add_argument("-raw", action="store_true", help="CSV output")
    ap.add_argument("-s", dest="save_dir", default=None, metavar="DIR", help="save output vectors")
    ap.add_argument("-p", type=_positive_int, default=d.p, help="workers in a 1 x p grid")
    ap.add_argument("-reps", type=_positive_int, default=d.reps)
    ap.add_argument("-warmup", type=_non_negative_int, default=d.warmup)
    ap.add_argument("-tol", type=_tolerance, default=d.tol, help="relative error tolerance")
    ap.add_argument("-sweep", action="store_true", help="run all 32 precision configs")
    ap.add_argument("-seed", type=int, default=d.seed)
    return ap


def parse_args(argv=None) -> RunArgs:
    ns = make_parser().parse_args(argv)
    args = RunArgs(**vars(ns))
    if args.p > args.n_m:
        make_parser().error(f"argument -p: {args.p} workers exceed -nm {args.n_m}")
    return args


def run(args: RunArgs, out=None) -> int:
    out = out or sys.stdout
    dims = ProblemDims(args.n_m, args.n_d, args.n_t)
    col, m, d = build_problem(dims, args.rand, args.seed)
    mv = _Matvecs(col, args.p)
    if args.save_dir:
        os.makedirs(args.save_dir, exist_ok=True)

    if args.sweep:
        for kind, fn, vec in (("forward", mv.forward, m), ("adjoint", mv.adjoint, d)):
            results = sweep_configs(mv.op, vec, kind, args.reps, args.warmup, matvec=fn)
            rep = SweepReport((dims.n_m, dims.n_d, dims.n_t), kind, args.reps, args.warmup,
                              args.tol, results, optimal_config(results, args.tol))
            if args.raw:
                out.write(_sweep_meta(rep) + "\n")
                out.write(rep.to_csv())
            else:
                _write_sweep_table(rep, out)
            if args.save_dir:
                for cfg in {PrecisionConfig.all_double(), rep.chosen}:
                    res, _ = fn(mv.op, vec, cfg)
                    save_vector(os.path.join(args.save_dir, f"{kind}_{cfg}.fmv"), res)
        return 0

    cfg = PrecisionConfig.parse(args.prec or "ddddd")
    stats = {}
    for kind, fn, vec in (("forward", mv.forward, m), ("adjoint", mv.adjoint, d)):
        res, mean, lo, hi = _time_phases(fn, mv.op, vec, cfg, args.reps, args.warmup)
        stats[kind] = (mean, lo, hi)
        if args.save_dir:
            save_vector(os.path.join(args.save_dir, f"{kind}_{cfg}.fmv"), res)
    if args.raw:
        _write_phase_csv(stats, out)
    else:
        _write_phase_table(stats, out, f"n_m={dims.n_m} n_d={dims.n_d} n_t={dims.n_t} "
                                       f"prec={cfg} p={args.p} reps={args.reps}")
    return 0


def main(argv=None) -> int:
    args = parse_args(argv)
    try:
        return run(args)
    except OSError as exc:
        print(f"fft-matvec: I/O error: {exc}", file=sys.stderr)
        return 1


def bench_main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="gemv-bench",
                                 description="Batched GEMV bandwidth from {key: value} rows.")
    ap.add_argument("config", help="file with one '- {M: .., N: .., ...}' row per line")
    ap.add_argument("--kernel", choices=["auto", "naive", "tiled"], default="auto")
    ap.add_argument("--col-tile", type=_positive_int, default=TilingParams.col_tile)
    ap.add_argument("--row-chunk", type=_positive_int, default=TilingParams.row_chunk)
    ns = ap.parse_args(argv)
    try:
        with open(ns.config) as fh:
            rows = read_bench_configs(fh.read())
    except OSError as exc:
        print(f"gemv-bench: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        ap.error(str(exc))
    params = TilingParams(col_tile=ns.col_tile, row_chunk=ns.row_chunk)
    kernel = None if ns.kernel == "auto" else KernelChoice(ns.kernel)
    w = csv.writer(sys.stdout, lineterminator="\n")
    fields = ["function", "M", "N", "batch_count", "transA", "kernel", "mean_s", "min_s",
              "max_s", "gbytes_per_s"]
    w.writerow(fields)
    for cfg in rows:
        if kernel is KernelChoice.TILED and cfg.transA == "N":
            ap.error("the tiled kernel does not support transA: N")
        r = run_bench(cfg, params, kernel)
        w.writerow([r[f] for f in fields])
    return 0


if __name__ == "__main__":
    sys.exit(main())
