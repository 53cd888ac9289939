"""Static SVG figures. Every figure is written next to a CSV holding exactly
the plotted numbers; all statistics come from ``hierlab.stats``."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

SVG_SALT = "hierlab"
_METRIC_TITLES = {"mean": "Mean", "median": "Median", "iqm": "IQM", "og": "Optimality gap"}


def _save(fig, path: Path) -> Path:
    # fixed hash salt and no date keep the SVG byte-identical across runs
    with matplotlib.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "none"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def write_csv(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def learning_curve(rows: list[tuple], out: Path, ylabel: str) -> Path:
    """rows: (task, variant, t, mean, ci_lo, ci_hi)."""
    tasks = sorted({r[0] for r in rows})
    fig, axes = plt.subplots(1, len(tasks), figsize=(5 * len(tasks), 3.6), squeeze=False)
    for ax, task in zip(axes[0], tasks):
        for variant in sorted({r[1] for r in rows if r[0] == task}):
            pts = sorted((r[2], r[3], r[4], r[5]) for r in rows if r[0] == task and r[1] == variant)
            t, m, lo, hi = zip(*pts)
            ax.plot(t, m, label=variant)
            ax.fill_between(t, lo, hi, alpha=0.25)
        ax.set_title(task)
        ax.set_xlabel("environment steps")
        ax.set_ylabel(ylabel)
        ax.legend(fontsize="small")
    fig.tight_layout()
    return _save(fig, out)


def profile(rows: list[tuple], out: Path, xlabel: str) -> Path:
    """rows: (variant, tau, fraction)."""
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for variant in sorted({r[0] for r in rows}):
        pts = [(r[1], r[2]) for r in rows if r[0] == variant]
        ax.step(*zip(*pts), where="post", label=variant)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("fraction of runs with score > tau")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize="small")
    fig.tight_layout()
    return _save(fig, out)


def prob_improvement(rows: list[tuple], out: Path) -> Path:
    """rows: (x, y, probability, ci_lo, ci_hi)."""
    fig, ax = plt.subplots(figsize=(5.5, 0.6 + 0.5 * len(rows)))
    labels = [f"P({x} > {y})" for x, y, *_ in rows]
    p = [r[2] for r in rows]
    err = [[r[2] - r[3] for r in rows], [r[4] - r[2] for r in rows]]
    pos = list(range(len(rows)))
    ax.barh(pos, p, xerr=err, color="tab:blue", alpha=0.7)
    ax.axvline(0.5, color="grey", linestyle="--", linewidth=1)
    ax.set_yticks(pos)
    ax.set_yticklabels(labels, fontsize="small")
    ax.set_xlim(0.0, 1.0)
    ax.set_xlabel("probability of improvement")
    fig.tight_layout()
    return _save(fig, out)


def agg_bars(rows: list[tuple], out: Path) -> Path:
    """rows: (variant, metric, value, ci_lo, ci_hi)."""
    metrics = [m for m in ("mean", "median", "iqm", "og") if any(r[1] == m for r in rows)]
    variants = sorted({r[0] for r in rows})
    fig, axes = plt.subplots(1, len(metrics), figsize=(3.2 * len(metrics), 0.8 + 0.45 * len(variants)),
                             squeeze=False)
    for ax, metric in zip(axes[0], metrics):
        sel = {r[0]: r for r in rows if r[1] == metric}
        vs = [v for v in variants if v in sel]
        vals = [sel[v][2] for v in vs]
        err = [[sel[v][2] - sel[v][3] for v in vs], [sel[v][4] - sel[v][2] for v in vs]]
        ax.barh(range(len(vs)), vals, xerr=err, alpha=0.7)
        ax.set_yticks(range(len(vs)))
        ax.set_yticklabels(vs if ax is axes[0][0] else [], fontsize="small")
        ax.set_title(_METRIC_TITLES[metric])
    fig.tight_layout()
    return _save(fig, out)
