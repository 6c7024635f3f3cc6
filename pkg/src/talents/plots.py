"""Figure rendering for evaluation reports (written next to the tables)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def crossplay_figure(report, path) -> None:
    """Per-partner mean return with standard-error bars."""
    rows = [r for r in report.rows if r["partner"] != "__all__"]
    names = [r["partner"] for r in rows]
    means = [r["mean_return"] for r in rows]
    errs = [r["se"] for r in rows]
    fig, ax = plt.subplots(figsize=(max(4, 0.8 * len(rows)), 3.2))
    ax.bar(range(len(rows)), means, yerr=errs, capsize=3,
           color="tab:blue")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("mean return")
    ax.set_title(f"cross-play ({rows[0]['cooperator']}, "
                 f"{rows[0]['layout']})" if rows else "cross-play")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def swap_figure(swap_result, path) -> None:
    """Accumulated reward per mode plus the fixed-share weight trace."""
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
    swap_tick = swap_result["swap_tick"]
    for mode, runs in swap_result["modes"].items():
        curves = np.stack([run["cumulative_reward"] for run in runs])
        top.plot(curves.mean(axis=0), label=mode)
    top.axvline(swap_tick, color="grey", linestyle="--", linewidth=1)
    top.set_ylabel("accumulated reward")
    top.legend(fontsize=8)
    weights = swap_result["modes"]["fixed-share"][0]["weights"]
    for c in range(weights.shape[1]):
        bottom.plot(weights[:, c], label=f"cluster {c}")
    bottom.axvline(swap_tick, color="grey", linestyle="--", linewidth=1)
    bottom.set_xlabel("tick")
    bottom.set_ylabel("belief weight")
    bottom.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def sweep_figure(reports: dict, path) -> None:
    """Pooled mean return as a function of the cluster count K."""
    ks = sorted(reports)
    means = [reports[k].mean_return() for k in ks]
    errs = [next(r["se"] for r in reports[k].rows
                 if r["partner"] == "__all__") for k in ks]
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ax.errorbar(ks, means, yerr=errs, marker="o", capsize=3)
    ax.set_xlabel("number of clusters K")
    ax.set_ylabel("mean holdout return")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def training_curve_figure(curve: list, path, y: str = "mean_return",
                          x: str = "steps") -> None:
    """Generic training-curve line plot from a list of row dicts."""
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ax.plot([row[x] for row in curve], [row[y] for row in curve])
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
