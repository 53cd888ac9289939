"""``hierlab`` command line: run experiment matrices, aggregate results, draw figures."""

from __future__ import annotations

import argparse
import logging
import sys
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hierlab import stats
from hierlab.config import (
    ConfigError, TrainConfig, config_reference, deep_merge, from_dict, load_yaml,
    parse_override, variant_slug, variant_toggles,
)
from hierlab.envs import TASKS
from hierlab.trainer import RunRecord, best_and_last, train_run

log = logging.getLogger("hierlab")

DEFAULT_SEEDS = 10
PROTOCOLS = {
    # score extractor, optimality-gap target
    "best_success": (lambda r: best_and_last(r)[0], 1.0),
    "last_return": (lambda r: best_and_last(r)[1], 0.0),
}
PLOT_KINDS = ("learning_curve", "profile", "prob_improvement", "agg_bars")


@dataclass
class ExperimentMatrix:
    tasks: list[str]
    variants: list[str]
    seeds: list[int] = field(default_factory=lambda: list(range(DEFAULT_SEEDS)))
    shared: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.tasks:
            raise ConfigError("tasks: must list at least one task")
        if not self.variants:
            raise ConfigError("variants: must list at least one variant")
        if not self.seeds:
            raise ConfigError("seeds: must list at least one seed")
        if len(set(self.variants)) != len(self.variants):
            raise ConfigError("variants: names must be unique")
        slugs = [variant_slug(v) for v in self.variants]
        if len(set(slugs)) != len(slugs):
            raise ConfigError("variants: two names map to the same component set")
        # build one config up front so key errors surface before any run starts
        from_dict(TrainConfig, self.shared)

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentMatrix":
        data = dict(data)
        tasks = data.pop("tasks", None)
        variants = data.pop("variants", None)
        seeds = data.pop("seeds", DEFAULT_SEEDS)
        if isinstance(tasks, str):
            tasks = [tasks]
        if isinstance(variants, str):
            variants = [variants]
        if not isinstance(tasks, list):
            raise ConfigError("tasks: expected a list of task ids")
        if not isinstance(variants, list):
            raise ConfigError("variants: expected a list of variant names")
        if isinstance(seeds, bool) or not isinstance(seeds, (int, list)):
            raise ConfigError("seeds: expected a count or a list of integers")
        seeds = list(range(seeds)) if isinstance(seeds, int) else seeds
        if any(isinstance(s, bool) or not isinstance(s, int) for s in seeds):
            raise ConfigError("seeds: expected integers")
        for key in ("task", "variant", "seed", "her", "per", "hier", "e2h_ise"):
            if key in data:
                raise ConfigError(f"{key}: set by the matrix, not allowed as a shared key")
        return cls([str(t) for t in tasks], [str(v) for v in variants], seeds, data)

    def configs(self) -> list[TrainConfig]:
        out = []
        for task in self.tasks:
            for variant in self.variants:
                for seed in self.seeds:
                    doc = dict(self.shared, task=task, variant=variant, seed=seed,
                               **variant_toggles(variant))
                    out.append(from_dict(TrainConfig, doc).validate())
        return out


def _run_one(cfg: TrainConfig, out_dir: str) -> str:
    return str(train_run(cfg).write_jsonl(out_dir))


def _parse_seeds(text: str) -> list[int]:
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"--seeds: cannot parse {text!r}") from exc


def load_matrix(path, overrides=(), seeds: list[int] | None = None) -> ExperimentMatrix:
    data = load_yaml(path)
    for ov in overrides:
        data = deep_merge(data, parse_override(ov))
    if seeds is not None:
        data["seeds"] = seeds
    return ExperimentMatrix.from_mapping(data)


def cmd_train(args) -> int:
    seeds = None
    if args.seed is not None:
        seeds = [args.seed]
    elif args.seeds is not None:
        seeds = _parse_seeds(args.seeds)
    matrix = load_matrix(args.config, args.override, seeds)
    configs = matrix.configs()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log.info("%d runs (%d tasks x %d variants x %d seeds) -> %s", len(configs), len(matrix.tasks),
             len(matrix.variants), len(matrix.seeds), out)
    failures = 0
    if args.jobs <= 1:
        for cfg in configs:
            try:
                log.info("wrote %s", _run_one(cfg, str(out)))
            except Exception:
                failures += 1
                log.exception("run %s / %s / seed %d failed", cfg.task, cfg.variant, cfg.seed)
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = {pool.submit(_run_one, cfg, str(out)): cfg for cfg in configs}
            for fut in as_completed(futures):
                cfg = futures[fut]
                try:
                    log.info("wrote %s", fut.result())
                except Exception:
                    failures += 1
                    log.exception("run %s / %s / seed %d failed", cfg.task, cfg.variant, cfg.seed)
    if failures:
        log.error("%d of %d runs failed", failures, len(configs))
        return 1
    return 0


def variant_label(record: RunRecord) -> str:
    if record.variant:
        return record.variant
    return record.file_name().split("_")[-2]


def load_records(run_dir) -> list[RunRecord]:
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise ConfigError(f"run directory {run_dir} does not exist")
    records = [RunRecord.read_jsonl(p) for p in sorted(run_dir.glob("*.jsonl"))]
    if not records:
        raise ConfigError(f"no run records (*.jsonl) in {run_dir}")
    return records


def score_sets(records: list[RunRecord], protocol: str) -> dict[str, stats.ScoreSet]:
    """variant -> task -> per-seed scores (seed order)."""
    if protocol not in PROTOCOLS:
        raise ConfigError(f"unknown protocol {protocol!r}; expected one of {sorted(PROTOCOLS)}")
    extract = PROTOCOLS[protocol][0]
    grouped: dict[str, dict[str, list]] = defaultdict(lambda: defaultdict(list))
    for r in sorted(records, key=lambda r: (variant_label(r), r.task, r.seed)):
        grouped[variant_label(r)][r.task].append(extract(r))
    return {v: stats.ScoreSet(tasks) for v, tasks in grouped.items()}


def coverage_gaps(records: list[RunRecord]) -> list[str]:
    """Human-readable list of (variant, task, seed) cells missing from the matrix."""
    have = {(variant_label(r), r.task, r.seed) for r in records}
    variants = sorted({k[0] for k in have})
    tasks = sorted({k[1] for k in have})
    seeds = sorted({k[2] for k in have})
    gaps = []
    for v in variants:
        for t in tasks:
            missing = [s for s in seeds if (v, t, s) not in have]
            if missing:
                gaps.append(f"{v} / {t}: missing seeds {missing}")
    return gaps


def aggregate_table(sets: dict[str, stats.ScoreSet], target: float, n_resamples: int,
                    seed: int, level: float = 0.95) -> list[tuple]:
    """Rows ``(variant, metric, value, ci_lo, ci_hi)``; one CI stream per (variant, metric)."""
    rows = []
    for vi, variant in enumerate(sorted(sets)):
        scores = sets[variant]
        pooled = scores.pooled()
        for mi, metric in enumerate(stats.METRICS):
            tgt = target if metric == "og" else None
            # across tasks the point estimate pools the runs, as the stratified bootstrap does
            value = stats.aggregate(pooled, metric, tgt)
            rng = np.random.default_rng([seed, vi, mi])
            lo, hi = stats.stratified_bootstrap_ci(scores, metric, n_resamples, level, rng, tgt)
            rows.append((variant, metric, value, lo, hi))
    return rows


def cmd_aggregate(args) -> int:
    records = load_records(args.run_dir)
    for gap in coverage_gaps(records):
        log.warning("gap: %s", gap)
    sets = score_sets(records, args.protocol)
    rows = aggregate_table(sets, PROTOCOLS[args.protocol][1], args.resamples, args.ci_seed)
    from hierlab.plots import write_csv

    out = Path(args.out) if args.out else Path(args.run_dir) / f"aggregate_{args.protocol}.csv"
    write_csv(out, ["variant", "metric", "value", "ci_lo", "ci_hi"], rows)
    print(out)
    return 0


def _read_table(path: Path) -> list[tuple]:
    import csv

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = ["variant", "metric", "value", "ci_lo", "ci_hi"]
        missing = [c for c in need if c not in (reader.fieldnames or [])]
        if missing:
            raise ConfigError(f"{path}: missing column(s) {missing}")
        return [(r["variant"], r["metric"], float(r["value"]), float(r["ci_lo"]), float(r["ci_hi"]))
                for r in reader]


def learning_curve_rows(records: list[RunRecord], field_name: str, n_resamples: int,
                        seed: int) -> list[tuple]:
    series: dict[tuple, list] = defaultdict(list)
    for r in records:
        if not r.series:
            raise ConfigError(f"missing series: run {r.file_name()} has no evaluation points")
        series[(r.task, variant_label(r))].append({p.t: getattr(p, field_name) for p in r.series})
    rows = []
    for gi, (task, variant) in enumerate(sorted(series)):
        runs = series[(task, variant)]
        ts = sorted(set.intersection(*(set(s) for s in runs)))
        for ti, t in enumerate(ts):
            xs = [s[t] for s in runs]
            lo, hi = stats.bootstrap_ci(xs, "mean", n_resamples, 0.95, np.random.default_rng([seed, gi, ti]))
            rows.append((task, variant, t, stats.aggregate(xs, "mean"), lo, hi))
    return rows


def profile_rows(sets: dict[str, stats.ScoreSet], taus) -> list[tuple]:
    rows = []
    for variant in sorted(sets):
        for p in stats.performance_profile(sets[variant], taus, "run_score"):
            rows.append((variant, p.tau, p.fraction))
    return rows


def improvement_rows(sets: dict[str, stats.ScoreSet], pairs, n_resamples: int, seed: int) -> list[tuple]:
    rows = []
    for i, (x, y) in enumerate(pairs):
        for name in (x, y):
            if name not in sets:
                raise ConfigError(f"missing series: no runs for variant {name!r}")
        p = stats.probability_of_improvement(sets[x], sets[y])
        lo, hi = stats.probability_of_improvement_ci(sets[x], sets[y], n_resamples, 0.95,
                                                     np.random.default_rng([seed, i]))
        rows.append((x, y, p, lo, hi))
    return rows


def cmd_plot(args) -> int:
    from hierlab import plots

    src = Path(args.input)
    out_dir = Path(args.out_dir) if args.out_dir else (src.parent if src.is_file() else src)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = out_dir / f"{args.kind}_{args.protocol}" if args.kind != "learning_curve" else \
        out_dir / f"learning_curve_{args.field}"
    if args.kind == "agg_bars":
        if src.is_file():
            rows = _read_table(src)
        else:
            records = load_records(src)
            rows = aggregate_table(score_sets(records, args.protocol), PROTOCOLS[args.protocol][1],
                                   args.resamples, args.ci_seed)
        plots.write_csv(stem.with_suffix(".csv"), ["variant", "metric", "value", "ci_lo", "ci_hi"], rows)
        svg = plots.agg_bars(rows, stem.with_suffix(".svg"))
    else:
        records = load_records(src)
        if args.kind == "learning_curve":
            rows = learning_curve_rows(records, args.field, args.resamples, args.ci_seed)
            plots.write_csv(stem.with_suffix(".csv"), ["task", "variant", "t", "mean", "ci_lo", "ci_hi"], rows)
            svg = plots.learning_curve(rows, stem.with_suffix(".svg"), args.field)
        elif args.kind == "profile":
            sets = score_sets(records, args.protocol)
            if args.protocol == "best_success":
                taus = stats.DEFAULT_TAU_GRID
            else:
                pooled = np.concatenate([s.pooled() for s in sets.values()])
                taus = np.linspace(pooled.min() - 1.0, pooled.max() + 1.0, 101)
            rows = profile_rows(sets, taus)
            plots.write_csv(stem.with_suffix(".csv"), ["variant", "tau", "fraction"], rows)
            svg = plots.profile(rows, stem.with_suffix(".svg"), args.protocol)
        else:
            sets = score_sets(records, args.protocol)
            if args.pairs:
                pairs = [tuple(p.split(":", 1)) for p in args.pairs]
                if any(len(p) != 2 for p in pairs):
                    raise ConfigError("--pair: expected X:Y")
            else:
                names = sorted(sets)
                pairs = [(x, y) for i, x in enumerate(names) for y in names[i + 1:]]
            rows = improvement_rows(sets, pairs, args.resamples, args.ci_seed)
            plots.write_csv(stem.with_suffix(".csv"), ["x", "y", "probability", "ci_lo", "ci_hi"], rows)
            svg = plots.prob_improvement(rows, stem.with_suffix(".svg"))
    print(svg)
    return 0


def cmd_list_tasks(args) -> int:
    if args.config_keys:
        sys.stdout.write(config_reference())
        return 0
    width = max(len(t) for t in TASKS)
    for task, desc in TASKS.items():
        print(f"{task.ljust(width)}  {desc}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hierlab", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run an experiment matrix")
    t.add_argument("--config", required=True, help="YAML matrix: tasks, variants, seeds + shared keys")
    g = t.add_mutually_exclusive_group()
    g.add_argument("--seed", type=int, help="run a single seed")
    g.add_argument("--seeds", help="comma list or lo..hi range")
    t.add_argument("--jobs", type=int, default=1, help="concurrent runs")
    t.add_argument("--out-dir", default="runs")
    t.add_argument("--override", action="append", default=[], metavar="K=V",
                   help="dotted key override, e.g. agent.lr=3e-4 (repeatable)")
    t.set_defaults(func=cmd_train)

    a = sub.add_parser("aggregate", help="per-variant point estimates with stratified bootstrap CIs")
    a.add_argument("run_dir")
    a.add_argument("--protocol", choices=sorted(PROTOCOLS), default="best_success")
    a.add_argument("--out", help="CSV path (default: <run_dir>/aggregate_<protocol>.csv)")
    a.add_argument("--resamples", type=int, default=stats.DEFAULT_RESAMPLES)
    a.add_argument("--ci-seed", type=int, default=0)
    a.set_defaults(func=cmd_aggregate)

    pl = sub.add_parser("plot", help="SVG figure plus sidecar CSV")
    pl.add_argument("kind", choices=PLOT_KINDS)
    pl.add_argument("input", help="run directory, or an aggregate CSV for agg_bars")
    pl.add_argument("--protocol", choices=sorted(PROTOCOLS), default="best_success")
    pl.add_argument("--field", choices=("success_rate", "mean_return"), default="success_rate",
                    help="learning_curve y value")
    pl.add_argument("--pair", dest="pairs", action="append", metavar="X:Y",
                    help="prob_improvement pair (repeatable; default all pairs)")
    pl.add_argument("--out-dir")
    pl.add_argument("--resamples", type=int, default=stats.DEFAULT_RESAMPLES)
    pl.add_argument("--ci-seed", type=int, default=0)
    pl.set_defaults(func=cmd_plot)

    lt = sub.add_parser("list-tasks", help="known task ids")
    lt.add_argument("--config-keys", action="store_true", help="print the config key reference instead")
    lt.set_defaults(func=cmd_list_tasks)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"hierlab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
