"""Command-line front end: ``samplereuse {run,bench,audit}``.

Every output CSV starts with ``#`` metadata lines (tool version, generator,
seed, config hash and the canonical config), followed by a header row.
Contents depend only on the config, so repeated runs are byte-identical
regardless of ``--workers``.

Exit codes: 0 ok, 1 runtime failure, 2 config error, 3 audit violation.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__
from .complexity import (
    COST_COLUMNS,
    corollary_bound,
    reuse_cost_factor,
    trial_statistics,
)
from .config import CONFIG_PREFIX, ConfigError, ExperimentConfig, build_chain_from_spec, build_predicate, load_config
from .engine import naive_run, run
from .estimation import CURVE_COLUMNS, DONUT_COLUMNS, RobustnessCurve, donut_estimates, margin
from .geometry import Donut, audit_nestedness
from .predicates import CountingPredicate
from .sampling import generator_name, make_stream

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_AUDIT = 0, 1, 2, 3

BENCH_COLUMNS = (
    "method",
    "trials",
    "N",
    "m",
    "mean_experiments",
    "stderr",
    "predicate_evaluations",
    "fresh_samples",
    "cost_ratio",
    "cost_ratio_stderr",
    "analytic_ratio",
    "z",
)
AUDIT_COLUMNS = ("source_index", "failing_index")


class AuditFailure(Exception):
    def __init__(self, report):
        super().__init__(f"{len(report.violations)} nesting violations")
        self.report = report


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def write_csv(path, config: ExperimentConfig, columns, rows, extra=()):
    """Write metadata lines, the header row and ``rows``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# samplereuse {__version__}\n")
        fh.write(f"# generator: {generator_name()}\n")
        fh.write(f"# seed: {config.seed}\n")
        fh.write(f"# config_sha256: {config.digest()}\n")
        fh.write(f"{CONFIG_PREFIX}{config.canonical_json()}\n")
        for key, value in extra:
            fh.write(f"# {key}: {_fmt(value)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


@lru_cache(maxsize=8)
def _setup(canonical_json):
    import json

    data = json.loads(canonical_json)
    chain = build_chain_from_spec(data["chain"])
    predicate = build_predicate(data["predicate"], chain.dim)
    return chain, predicate


def _trial(args):
    canonical_json, seed, N, t, method = args
    chain, predicate = _setup(canonical_json)
    counter = CountingPredicate(predicate)
    if method == "naive":
        res = naive_run(chain, N, counter, make_stream(seed, t, "naive"))
    else:
        res = run(chain, N, counter, make_stream(seed, t, "engine"))
    return res.ledger, res.successes(), counter.count


def run_trials(config: ExperimentConfig, method="reuse", workers=1):
    """Run ``config.trials`` independent trials; results are in trial order."""
    jobs = [(config.canonical_json(), config.seed, config.N, t, method) for t in range(config.trials)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_trial, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [_trial(j) for j in jobs]


def _corollary(chain, N):
    """Scaled-shape bound, when every volume is proportional to label**d."""
    labels = np.asarray(chain.labels)
    if np.any(labels <= 0):
        return None
    offset = chain.log_volumes - chain.dim * np.log(labels)
    if np.ptp(offset) > 1e-9 * max(1.0, float(np.max(np.abs(offset)))):
        return None
    return corollary_bound(chain.dim, float(labels[0]), float(labels[-1]), N)


def _ensure_audited(config, chain, log):
    if not chain.needs_audit:
        return
    K = config.audit_samples or 1000
    report = audit_nestedness(chain, K, make_stream(config.seed, 0, "audit"))
    log(f"nesting audit ({K} samples per set): {'pass' if report.passed else 'FAIL'}")
    if not report.passed:
        raise AuditFailure(report)


def cmd_run(config: ExperimentConfig, out: Path, workers=1, log=print):
    chain, _ = _setup(config.canonical_json())
    _ensure_audited(config, chain, log)
    results = run_trials(config, "reuse", workers)
    ledgers = [r[0] for r in results]
    k = np.sum([r[1] for r in results], axis=0)
    curve = RobustnessCurve(chain.labels, k, config.N * config.trials, config.level)
    files = [write_csv(out / "curve.csv", config, CURVE_COLUMNS, curve.rows(),
                       extra=[("level", config.level), ("trials", config.trials)])]

    cor = _corollary(chain, config.N)
    if config.trials >= 2:
        report = trial_statistics(ledgers, corollary=cor)
        extra = [
            ("trials", report.trials),
            ("truncated_trials", report.truncated_trials),
            ("theorem_bound", report.theorem_bound),
            ("corollary_bound", "n/a" if cor is None else cor),
            ("total_quantiles", " ".join(f"q{int(q * 100):02d}={_fmt(v)}" for q, v in report.quantiles.items())),
        ]
        files.append(write_csv(out / "cost.csv", config, COST_COLUMNS, report.rows(), extra))
        log(f"mean experiments {report.mean_total:.1f} +/- {report.stderr_total:.1f} "
            f"(exact {report.expected_total:.1f}, bound {report.theorem_bound:.1f}, naive {config.N * chain.m})")
    else:
        log("cost.csv skipped: needs at least 2 trials")

    if config.epsilons and np.all(np.diff(curve.labels) > 0):
        rows = []
        for eps in config.epsilons:
            rows.append((eps, margin(curve, eps), margin(curve, eps, conservative=True)))
        files.append(write_csv(out / "margins.csv", config, ("epsilon", "margin", "margin_conservative"), rows))

    if all(isinstance(s, Donut) for s in chain):
        est = donut_estimates(chain, curve)
        rows = [(i + 1, e.label, e.wp_hat, e.lam, e.estimate, e.ci_lo, e.ci_hi) for i, e in enumerate(est)]
        files.append(write_csv(out / "donut.csv", config, DONUT_COLUMNS, rows,
                               extra=[("inner_radius", chain[0].inner_radius)]))
    return files


def cmd_bench(config: ExperimentConfig, out: Path, workers=1, timing=False, log=print):
    chain, _ = _setup(config.canonical_json())
    _ensure_audited(config, chain, log)
    naive_cost = config.N * chain.m
    analytic = reuse_cost_factor(chain) / chain.m
    rows, times = [], {}
    for method in ("naive", "reuse"):
        t0 = time.perf_counter()
        results = run_trials(config, method, workers)
        times[method] = time.perf_counter() - t0
        totals = np.array([r[0].total for r in results], dtype=float)
        evals = int(sum(r[2] for r in results))
        fresh = int(totals.sum())
        mean = float(totals.mean())
        se = float(totals.std(ddof=1) / math.sqrt(totals.size)) if totals.size > 1 else math.nan
        ratio = mean / naive_cost
        ratio_se = se / naive_cost
        target = 1.0 if method == "naive" else analytic
        if ratio_se > 0:
            z = (ratio - target) / ratio_se
        else:
            z = 0.0 if math.isclose(ratio, target, rel_tol=1e-12) else math.copysign(math.inf, ratio - target)
        row = [method, config.trials, config.N, chain.m, mean, se, evals, fresh, ratio, ratio_se,
               1.0 if method == "naive" else analytic, z]
        rows.append(row)
        log(f"{method:>5}: {mean:.1f} experiments/trial, ratio {ratio:.4f} "
            f"(analytic {row[10]:.4f}), {evals} predicate evaluations, {times[method]:.2f}s")
    columns = BENCH_COLUMNS
    if timing:
        columns = columns + ("wall_seconds",)
        rows = [r + [times[r[0]]] for r in rows]
    return [write_csv(out / "bench.csv", config, columns, rows)]


def cmd_audit(config: ExperimentConfig, out: Path, log=print):
    if config.audit_samples is None:
        raise ConfigError("audit needs 'audit_samples' (K >= 1)", field="audit_samples")
    chain, _ = _setup(config.canonical_json())
    report = audit_nestedness(chain, config.audit_samples, make_stream(config.seed, 0, "audit"))
    columns = AUDIT_COLUMNS + tuple(f"x{j + 1}" for j in range(chain.dim))
    rows = [(v.source + 1, v.failing + 1) + v.point for v in report.violations]
    path = write_csv(out / "audit.csv", config, columns, rows,
                     extra=[("samples_per_set", report.samples_per_set),
                            ("verdict", "pass" if report.passed else "fail")])
    log(f"audit: {len(report.violations)} violations over {chain.m} sets x {report.samples_per_set} samples")
    return report, [path]


def build_parser():
    parser = argparse.ArgumentParser(prog="samplereuse", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"samplereuse {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("run", "estimate the robustness curve and measure reuse cost"),
        ("bench", "compare naive and reuse experiment counts"),
        ("audit", "statistically check that the chain is nested"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, type=Path, help="TOML config or a previous output CSV")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", type=Path, help="output directory (default: config 'out' or '.')")
        p.add_argument("--trials", type=int, help="override the number of trials")
        p.add_argument("-q", "--quiet", action="store_true", help="no progress output")
        if name != "audit":
            p.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
        if name == "bench":
            p.add_argument("--timing", action="store_true",
                           help="add a wall_seconds column (makes output non-reproducible)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    def log(msg):
        if not args.quiet:
            print(msg)

    def err(msg):
        print(f"samplereuse: {msg}", file=sys.stderr)

    try:
        config = load_config(args.config)
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer", field="--seed")
        if args.trials is not None and args.trials < 1:
            raise ConfigError("--trials must be >= 1", field="--trials")
        config = config.replace(seed=args.seed, trials=args.trials)
        out = args.out or Path(config.out or ".")
        workers = getattr(args, "workers", 1)
        if workers < 1:
            raise ConfigError("--workers must be >= 1", field="--workers")
    except ConfigError as exc:
        err(f"config error: {exc}")
        return EXIT_CONFIG

    try:
        if args.command == "run":
            files = cmd_run(config, out, workers, log)
        elif args.command == "bench":
            files = cmd_bench(config, out, workers, args.timing, log)
        else:
            report, files = cmd_audit(config, out, log)
            if not report.passed:
                err(f"nesting violated: {len(report.violations)} violations written to {files[0]}")
                return EXIT_AUDIT
    except ConfigError as exc:
        err(f"config error: {exc}")
        return EXIT_CONFIG
    except AuditFailure as exc:
        err(f"chain failed its nesting audit: {exc}")
        return EXIT_AUDIT
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        err(f"runtime error: {exc}")
        return EXIT_RUNTIME
    for f in files:
        log(f"wrote {f}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
