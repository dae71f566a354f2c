"""PNG figures written next to a run's metrics.csv."""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# no timestamps or version strings, so reruns give identical files
_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)


def plot_auc(reports, epsilon, path):
    gens = [r.generation for r in reports]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(gens, [r.validation_auc for r in reports], "o-", label="validation AUC")
    ax.axhline(0.5 + epsilon, color="grey", ls="--", lw=1, label="stop threshold")
    ax.set_xlabel("generation")
    ax.set_ylabel("AUC")
    ax.set_ylim(0.4, 1.02)
    ax.legend(loc="upper right", fontsize=8)
    _save(fig, path)


def plot_rewards(reports, epsilon, path):
    fig, ax = plt.subplots(figsize=(6, 3.2))
    step = 0
    for r in reports:
        if r.reward_trace:
            xs = range(step, step + len(r.reward_trace))
            ax.plot(xs, r.reward_trace, lw=1)
            step += len(r.reward_trace)
            ax.axvline(step - 0.5, color="lightgrey", lw=0.8)
    ax.axhline(0.5 - epsilon, color="grey", ls="--", lw=1)
    ax.set_xlabel("inner step (all generations)")
    ax.set_ylabel("batch mean reward")
    _save(fig, path)


def plot_invariants(reports, path):
    keys = [k for k in (reports[0].invariants if reports else {})]
    keys += ["alignment", "feature_gap"]
    cols = 2
    rows = math.ceil(len(keys) / cols)
    fig, axes = plt.subplots(rows, cols, figsize=(7, 2.4 * rows), squeeze=False)
    gens = [r.generation for r in reports]
    for ax, key in zip(axes.ravel(), keys):
        if key in ("alignment", "feature_gap"):
            ys = [getattr(r, key) for r in reports]
        else:
            ys = [r.invariants.get(key, math.nan) for r in reports]
        ax.plot(gens, ys, "o-", ms=3)
        ax.set_title(key, fontsize=9)
        ax.set_xlabel("generation", fontsize=8)
    for ax in axes.ravel()[len(keys):]:
        ax.axis("off")
    _save(fig, path)


def plot_run(run_dir, reports, epsilon) -> list:
    """Render the standard figures; returns the written paths."""
    run_dir = Path(run_dir)
    ok = [r for r in reports if r.error is None]
    if not ok:
        return []
    paths = [run_dir / "auc.png", run_dir / "rewards.png", run_dir / "invariants.png"]
    plot_auc(ok, epsilon, paths[0])
    plot_rewards(ok, epsilon, paths[1])
    plot_invariants(ok, paths[2])
    return paths
