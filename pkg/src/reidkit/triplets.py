"""Hinge triplet objective, analytic gradients, and in-batch hard-negative mining.

The loss for a triple (a, p, n) is max(d(a, p) - d(a, n) + margin, 0). Mining
scans a batch of aligned (anchor, positive) pairs: a candidate negative for
pair i is any other pair's anchor a_j of a different subject that lies no
farther from a_i than its own positive, d(a_i, a_j) <= d(a_i, p_i). Ties
count. One candidate is drawn uniformly per pair from a PCG64 stream keyed by
(seed, pair index), so serial and parallel mining produce identical output.
Pairs with no candidate are dropped. The margin never enters the hardness
test.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._rng import spawn_rng
from .core import DistanceKind, distance, pairwise_distances
from .errors import (
    BatchTooSmallError,
    DataValidationError,
    DimensionError,
    InvalidSpecError,
)

DEFAULT_MARGIN = 0.2


@dataclass(frozen=True)
class LossConfig:
    """Margin and distance kind for the triplet objective."""

    margin: float = DEFAULT_MARGIN
    distance: DistanceKind = DistanceKind.EUCLIDEAN

    def __post_init__(self):
        if not np.isfinite(self.margin) or self.margin < 0:
            raise InvalidSpecError(f"margin must be finite and >= 0, got {self.margin!r}")
        object.__setattr__(self, "distance", DistanceKind(self.distance))


@dataclass(frozen=True)
class TripletBatch:
    """Aligned anchor/positive embeddings with one distinct subject per pair."""

    anchors: np.ndarray
    positives: np.ndarray
    ids: tuple[str, ...]

    def __post_init__(self):
        anchors = np.asarray(self.anchors, dtype=np.float64)
        positives = np.asarray(self.positives, dtype=np.float64)
        if anchors.ndim != 2 or positives.shape != anchors.shape:
            raise DimensionError(
                f"anchors and positives must be aligned 2-D arrays, got "
                f"{anchors.shape} vs {positives.shape}"
            )
        if anchors.shape[0] < 1 or anchors.shape[1] < 1:
            raise DimensionError("batch must hold at least one pair of nonempty vectors")
        ids = tuple(self.ids)
        if len(ids) != anchors.shape[0]:
            raise DimensionError(f"{len(ids)} ids for {anchors.shape[0]} pairs")
        if len(set(ids)) != len(ids):
            raise DataValidationError("batch subject ids must be pairwise distinct")
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "positives", positives)
        object.__setattr__(self, "ids", ids)

    def __len__(self) -> int:
        return self.anchors.shape[0]


@dataclass(frozen=True)
class MinedTriplets:
    """Mining result. All indices refer to the batch the triples came from.

    triples holds (anchor_index, positive_index, negative_index); anchor and
    positive always share the pair index, and the negative index names the
    anchor of another pair. survivors/dropped list retained and removed pair
    indices.
    """

    triples: tuple[tuple[int, int, int], ...]
    survivors: tuple[int, ...]
    dropped: tuple[int, ...]


@dataclass(frozen=True)
class TripletGradients:
    """d(loss)/d(anchor), d(loss)/d(positive), d(loss)/d(negative)."""

    anchor: np.ndarray
    positive: np.ndarray
    negative: np.ndarray


@dataclass(frozen=True)
class BatchLossResult:
    loss: float
    grad_anchors: np.ndarray
    grad_positives: np.ndarray
    survivor_count: int


def triplet_loss(anchor, positive, negative, config: LossConfig) -> float:
    """Hinge triplet loss; 0 exactly when the margin constraint is satisfied."""
    d_ap = distance(config.distance, anchor, positive)
    d_an = distance(config.distance, anchor, negative)
    return max(d_ap - d_an + config.margin, 0.0)


def _distance_grad(kind: DistanceKind, x: np.ndarray, y: np.ndarray, d: float):
    """(dd/dx, dd/dy) for d = distance(kind, x, y), float64 in and out.

    The euclidean kind has a kink at d == 0; the zero vector is used as the
    subgradient there.
    """
    if kind is DistanceKind.EUCLIDEAN:
        if d == 0.0:
            z = np.zeros_like(x)
            return z, z.copy()
        g = (x - y) / d
        return g, -g
    if kind is DistanceKind.SQUARED_EUCLIDEAN:
        g = 2.0 * (x - y)
        return g, -g
    # cosine: d = 1 - x.y / (|x||y|)
    nx = float(np.sqrt(np.sum(x * x)))
    ny = float(np.sqrt(np.sum(y * y)))
    dot = float(np.sum(x * y))
    sim = dot / (nx * ny)
    gx = (sim / (nx * nx)) * x - y / (nx * ny)
    gy = (sim / (ny * ny)) * y - x / (nx * ny)
    return gx, gy


def triplet_loss_grad(anchor, positive, negative, config: LossConfig):
    """Loss plus analytic gradients w.r.t. all three inputs.

    Gradients are all-zero exactly when the hinge is inactive (loss == 0).
    """
    a = np.asarray(anchor, dtype=np.float64)
    p = np.asarray(positive, dtype=np.float64)
    n = np.asarray(negative, dtype=np.float64)
    d_ap = distance(config.distance, a, p)
    d_an = distance(config.distance, a, n)
    loss = max(d_ap - d_an + config.margin, 0.0)
    if loss == 0.0:
        z = np.zeros_like(a)
        return loss, TripletGradients(z, z.copy(), z.copy())
    g_ap_a, g_ap_p = _distance_grad(config.distance, a, p, d_ap)
    g_an_a, g_an_n = _distance_grad(config.distance, a, n, d_an)
    return loss, TripletGradients(g_ap_a - g_an_a, g_ap_p, -g_an_n)


def mine_hard_triplets(batch: TripletBatch, config: LossConfig, rng_seed: int) -> MinedTriplets:
    """Pick one hard negative per pair; drop pairs that have none.

    For pair i the candidate set is every j != i with ids[j] != ids[i] and
    d(a_i, a_j) <= d(a_i, p_i). Candidates are judged against the full batch,
    so a dropped pair's anchor can still serve as another pair's negative.
    The draw for pair i comes from a stream keyed by (rng_seed, i).
    """
    B = len(batch)
    if B < 2:
        raise BatchTooSmallError(f"mining needs at least 2 pairs, got {B}")
    kind = config.distance
    d_anchor = pairwise_distances(kind, batch.anchors, batch.anchors)
    triples = []
    survivors = []
    dropped = []
    for i in range(B):
        d_pos = distance(kind, batch.anchors[i], batch.positives[i])
        hard = [
            j
            for j in range(B)
            if j != i and batch.ids[j] != batch.ids[i] and d_anchor[i, j] <= d_pos
        ]
        if hard:
            pick = hard[int(spawn_rng(rng_seed, i).integers(len(hard)))]
            triples.append((i, i, pick))
            survivors.append(i)
        else:
            dropped.append(i)
    return MinedTriplets(tuple(triples), tuple(survivors), tuple(dropped))


def batch_loss(batch: TripletBatch, mined: MinedTriplets, config: LossConfig) -> BatchLossResult:
    """Mean loss over mined triples plus gradients w.r.t. the batch embeddings.

    grad_anchors picks up both anchor-role and negative-role contributions
    (negatives are batch anchors); rows of dropped pairs that never serve as
    negatives stay zero. An empty triple list yields loss 0 and zero
    gradients.
    """
    B, D = batch.anchors.shape
    grad_anchors = np.zeros((B, D), dtype=np.float64)
    grad_positives = np.zeros((B, D), dtype=np.float64)
    n_triples = len(mined.triples)
    if n_triples == 0:
        return BatchLossResult(0.0, grad_anchors, grad_positives, 0)
    for ai, pi, ni in mined.triples:
        if not (0 <= ai < B and 0 <= pi < B and 0 <= ni < B):
            raise DataValidationError(f"triple ({ai}, {pi}, {ni}) does not fit a batch of {B}")
    total = 0.0
    for ai, pi, ni in mined.triples:
        loss, grads = triplet_loss_grad(
            batch.anchors[ai], batch.positives[pi], batch.anchors[ni], config
        )
        total += loss
        grad_anchors[ai] += grads.anchor
        grad_positives[pi] += grads.positive
        grad_anchors[ni] += grads.negative
    grad_anchors /= n_triples
    grad_positives /= n_triples
    return BatchLossResult(total / n_triples, grad_anchors, grad_positives, len(mined.survivors))
