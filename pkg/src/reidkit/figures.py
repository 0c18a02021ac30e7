"""Figure rendering for the CLI report paths (headless Agg backend).

Every function takes data plus an output path and writes one PNG. These sit
next to the delimited outputs so a run leaves both machine-readable and
glanceable artifacts.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .clusters import ClusterStats

_DPI = 150


def save_distance_histogram(stats: ClusterStats, path, title: str = "Intra vs inter subject distances") -> None:
    centers = (stats.bin_edges[:-1] + stats.bin_edges[1:]) / 2.0
    width = stats.bin_edges[1] - stats.bin_edges[0]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(centers, stats.intra_counts, width=width, alpha=0.6, label="intra-subject", color="tab:blue")
    ax.bar(centers, stats.inter_counts, width=width, alpha=0.6, label="inter-subject", color="tab:red")
    ax.set_xlabel("distance")
    ax.set_ylabel("count")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_loss_curve(losses, path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(np.arange(len(losses)), losses, linewidth=0.8, color="tab:blue")
    ax.set_xlabel("step")
    ax.set_ylabel("mean triplet loss")
    ax.set_title("Training loss")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_metric_bars(row: dict, path) -> None:
    """Single-setting summary: recall plus each hit radius as one bar."""
    labels = [f"MRe@{row['k_shot']}"]
    values = [row["m_recall_at_k"]]
    errs = [row["recall_std"]]
    for r in sorted(row["m_hit_at_r"], key=int):
        labels.append(f"MH@{r}")
        values.append(row["m_hit_at_r"][r])
        errs.append(row["hit_std"][r])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(labels, values, yerr=errs, capsize=3, color="tab:blue", alpha=0.8)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("metric value")
    ax.set_title(f"{row['setting']} retrieval ({row['episodes']} episodes)")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_metric_trend(rows: list[dict], path) -> None:
    """Recall trend across settings, one line per k_shot."""
    by_k: dict[int, list[dict]] = {}
    for row in rows:
        by_k.setdefault(row["k_shot"], []).append(row)
    fig, ax = plt.subplots(figsize=(7, 4))
    for k, group in sorted(by_k.items()):
        group = sorted(group, key=lambda r: r["n_way"])
        ax.plot(
            [r["n_way"] for r in group],
            [r["m_recall_at_k"] for r in group],
            marker="o",
            label=f"{k}-shot",
        )
    ax.set_xlabel("n_way")
    ax.set_ylabel("mean recall")
    ax.set_ylim(0, 1.05)
    ax.set_title("Recall across episode settings")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_projection_scatter(coords: np.ndarray, subjects, path) -> None:
    order = {s: i for i, s in enumerate(dict.fromkeys(subjects))}
    colors = [order[s] % 20 for s in subjects]
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.scatter(coords[:, 0], coords[:, 1], c=colors, cmap="tab20", s=12)
    ax.set_xlabel("component 1")
    ax.set_ylabel("component 2")
    ax.set_title(f"2-D projection ({len(order)} subjects)")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
