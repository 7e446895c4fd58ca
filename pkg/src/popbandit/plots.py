"""Static SVG figures written after a run.  Needs matplotlib (``pip install .[plot]``)."""

from __future__ import annotations

from pathlib import Path


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def pseudo_regret_strips(samples: dict[str, list[float]], path: Path, horizon: int):
    """One jittered strip of per-replication pseudo-regret per policy."""
    import numpy as np

    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    rng = np.random.default_rng(0)
    for i, (label, vals) in enumerate(samples.items()):
        x = i + rng.uniform(-0.15, 0.15, size=len(vals))
        ax.scatter(x, vals, s=8, alpha=0.6)
    ax.set_xticks(range(len(samples)))
    ax.set_xticklabels(list(samples), rotation=20, ha="right")
    ax.set_ylabel("pseudo-regret")
    ax.set_title(f"T = {horizon}")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def regret_vs_horizon(curves: dict[str, tuple[list, list, list]], path: Path):
    """``curves[label] = (horizons, means, ses)`` on log-log axes."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (T, mean, se) in curves.items():
        ax.errorbar(T, mean, yerr=se, marker="o", ms=3, capsize=2, label=label)
    ax.set_xscale("log")
    ax.set_yscale("symlog")
    ax.set_xlabel("T")
    ax.set_ylabel("expected pseudo-regret")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
