"""Cluster-separation statistics over an embedding set.

For each subject with at least two images, the intra-subject spread is the
mean distance from its images to its centroid; the report averages that over
subjects (miasd). The inter-subject spread is the mean distance over all
unordered pairs of subject centroids (miesd). Both come with population
standard deviations. Raw intra and inter distances are also binned into
equal-width histograms sharing one [0, max observed distance] range so the
two can be overlaid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DistanceKind, EmbeddingSet, distance
from .errors import InsufficientDataError, InvalidSpecError

DEFAULT_BINS = 50


@dataclass(frozen=True)
class ClusterStats:
    per_subject_mean: dict[str, np.ndarray]
    miasd_mean: float
    miasd_std: float
    miesd_mean: float
    miesd_std: float
    bin_edges: np.ndarray
    intra_counts: np.ndarray
    inter_counts: np.ndarray


def subject_means(embeddings: EmbeddingSet) -> dict[str, np.ndarray]:
    """Per-subject centroid (float64), keyed in first-appearance order."""
    if len(embeddings) == 0:
        raise InsufficientDataError("cannot compute subject means of an empty set")
    vectors = embeddings.vectors
    return {
        s: vectors[list(rows)].astype(np.float64).mean(axis=0)
        for s, rows in embeddings.groups.items()
    }


def cluster_stats(
    embeddings: EmbeddingSet,
    distance_kind: DistanceKind | str = DistanceKind.EUCLIDEAN,
    bins: int = DEFAULT_BINS,
) -> ClusterStats:
    """Intra/inter separation summary; needs at least two subjects.

    Subjects with a single image contribute a centroid (hence inter
    distances) but no intra distances. With no multi-image subject at all
    the intra fields degenerate to 0.
    """
    kind = DistanceKind(distance_kind)
    if bins < 1:
        raise InvalidSpecError(f"bins must be >= 1, got {bins}")
    means = subject_means(embeddings)
    if len(means) < 2:
        raise InsufficientDataError(
            f"cluster statistics need >= 2 subjects, got {len(means)}"
        )
    vectors = embeddings.vectors
    intra_raw: list[float] = []
    intra_per_subject: list[float] = []
    for s, rows in embeddings.groups.items():
        if len(rows) < 2:
            continue
        d = [distance(kind, vectors[r], means[s]) for r in rows]
        intra_raw.extend(d)
        intra_per_subject.append(float(np.mean(d)))
    subjects = list(means)
    inter_raw = [
        distance(kind, means[subjects[i]], means[subjects[j]])
        for i in range(len(subjects))
        for j in range(i + 1, len(subjects))
    ]
    if intra_per_subject:
        miasd_mean = float(np.mean(intra_per_subject))
        miasd_std = float(np.std(intra_per_subject))
    else:
        miasd_mean = 0.0
        miasd_std = 0.0
    miesd_mean = float(np.mean(inter_raw))
    miesd_std = float(np.std(inter_raw))
    hi = max(max(intra_raw, default=0.0), max(inter_raw))
    if hi <= 0.0:
        hi = 1.0
    edges = np.linspace(0.0, hi, bins + 1)
    intra_counts, _ = np.histogram(intra_raw, bins=edges)
    inter_counts, _ = np.histogram(inter_raw, bins=edges)
    return ClusterStats(
        per_subject_mean=means,
        miasd_mean=miasd_mean,
        miasd_std=miasd_std,
        miesd_mean=miesd_mean,
        miesd_std=miesd_std,
        bin_edges=edges,
        intra_counts=intra_counts,
        inter_counts=inter_counts,
    )


def export_histogram_csv(stats: ClusterStats, path) -> None:
    """Write the shared-bin histogram as bin_lo,bin_hi,intra_count,inter_count."""
    from .store import atomic_write_text

    lines = [["bin_lo", "bin_hi", "intra_count", "inter_count"]]
    for b in range(len(stats.intra_counts)):
        lines.append(
            [
                repr(float(stats.bin_edges[b])),
                repr(float(stats.bin_edges[b + 1])),
                str(int(stats.intra_counts[b])),
                str(int(stats.inter_counts[b])),
            ]
        )
    text = "\r\n".join(",".join(row) for row in lines) + "\r\n"
    atomic_write_text(path, text)
