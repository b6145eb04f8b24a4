"""Figure rendering for simulation and recovery artifacts.

All functions write a PNG to the given path and return that path; the
Agg backend is forced so rendering works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def laplacian_heatmap(B: np.ndarray, path, title: str = "Laplacian estimate"):
    """Signed heatmap of a (reduced) Laplacian matrix."""
    fig, ax = plt.subplots(figsize=(6, 5))
    vmax = float(np.abs(B).max()) or 1.0
    im = ax.imshow(B, cmap="RdBu_r", vmin=-vmax, vmax=vmax)
    ax.set_title(title)
    ax.set_xlabel("bus index (reduced)")
    ax.set_ylabel("bus index (reduced)")
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def degree_table_heatmap(table: np.ndarray, kappa1_grid, kappa2_grid, path,
                         target: float | None = None):
    """Average-degree sweep table with annotated cells."""
    fig, ax = plt.subplots(figsize=(1.2 * len(kappa2_grid) + 2,
                                    0.8 * len(kappa1_grid) + 2))
    im = ax.imshow(table, cmap="viridis")
    ax.set_xticks(range(len(kappa2_grid)), [f"{k:g}" for k in kappa2_grid])
    ax.set_yticks(range(len(kappa1_grid)), [f"{k:g}" for k in kappa1_grid])
    ax.set_xlabel("kappa2")
    ax.set_ylabel("kappa1")
    title = "Average degree per kappa pair"
    if target is not None:
        title += f" (target {target:.2f})"
    ax.set_title(title)
    for i in range(table.shape[0]):
        for j in range(table.shape[1]):
            ax.text(j, i, f"{table[i, j]:.2f}", ha="center", va="center",
                    color="white", fontsize=8)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def residual_history_plot(history, path):
    """Semilog plot of the three consensus residuals per iteration."""
    arr = np.asarray(history)
    fig, ax = plt.subplots(figsize=(6, 4))
    for k, label in enumerate(("|B1 - B2|", "|B1 - B3|", "|B1 Pi - S|")):
        ax.semilogy(arr[:, k], label=label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("Frobenius residual")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def tracking_trace_plot(trace: np.ndarray, intervals, labels, path,
                        swap_interval: int | None = None,
                        threshold: float = 0.01):
    """Watched normalized entries over the stream, with the event marked."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for col, label in enumerate(labels):
        ax.plot(intervals, trace[:, col], label=label)
    ax.axhline(threshold, color="gray", linestyle=":", linewidth=1)
    if swap_interval is not None:
        ax.axvline(swap_interval, color="black", linestyle="--", linewidth=1)
    ax.set_xlabel("market interval")
    ax.set_ylabel("normalized |entry|")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def price_profile_plot(pm_values: np.ndarray, interval_ids, path,
                       max_buses: int = 8):
    """Congestion price trajectories for the first few non-reference buses."""
    fig, ax = plt.subplots(figsize=(8, 4))
    for b in range(min(max_buses, pm_values.shape[0])):
        ax.plot(interval_ids, pm_values[b], linewidth=0.8, label=f"bus {b + 1}")
    ax.set_xlabel("market interval")
    ax.set_ylabel("congestion price, $/MWh")
    ax.legend(fontsize=7, ncols=2)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
