"""Episodic N-way K-shot retrieval evaluation.

An episode draws n_way subjects, then k_shot + 1 distinct images per subject;
the last drawn image of each subject is its query, the rest are supports.
Each query ranks all n_way * k_shot supports by ascending distance (ties
broken by support insertion order, i.e. the ranking by descending similarity
with similarity = -distance). Recall@K is the fraction of the query's K
same-subject supports retrieved in the top K; because exactly K records are
retrieved and K are relevant, Recall@K and Precision@K coincide. Hit@R is 1
when any of the top R supports shares the query's subject. Reported metrics
are means over ``episodes`` independent draws.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ._rng import spawn_rng
from .core import DistanceKind, EmbeddingSet, pairwise_distances
from .errors import InsufficientDataError, InvalidSpecError, MissingEmbeddingError

DEFAULT_EPISODES = 100


@dataclass(frozen=True)
class EpisodeSpec:
    """Evaluation protocol. ``hit_rs`` is normalized to a sorted unique tuple."""

    n_way: int
    k_shot: int
    hit_rs: tuple[int, ...] = (1,)
    episodes: int = DEFAULT_EPISODES
    seed: int = 0
    distance: DistanceKind = DistanceKind.EUCLIDEAN

    def __post_init__(self):
        if self.n_way < 2:
            raise InvalidSpecError(f"n_way must be >= 2, got {self.n_way}")
        if self.k_shot < 1:
            raise InvalidSpecError(f"k_shot must be >= 1, got {self.k_shot}")
        if self.episodes < 1:
            raise InvalidSpecError(f"episodes must be >= 1, got {self.episodes}")
        rs = tuple(sorted({int(r) for r in self.hit_rs}))
        if not rs:
            raise InvalidSpecError("hit_rs must not be empty")
        if rs[0] < 1 or rs[-1] > self.n_way * self.k_shot:
            raise InvalidSpecError(
                f"hit_rs must lie in [1, n_way * k_shot = {self.n_way * self.k_shot}], got {rs}"
            )
        object.__setattr__(self, "hit_rs", rs)
        object.__setattr__(self, "distance", DistanceKind(self.distance))


@dataclass(frozen=True)
class Episode:
    """Sampled records as (subject, image) keys; resolvable in any aligned set."""

    supports: tuple[tuple[str, str], ...]
    queries: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class EpisodeResult:
    recall_at_k: float
    hit_at_r: Mapping[int, float]


@dataclass(frozen=True)
class AggregateReport:
    """Means and population standard deviations across episodes."""

    m_recall_at_k: float
    recall_std: float
    m_hit_at_r: dict[int, float]
    hit_std: dict[int, float]
    episodes: int
    spec: EpisodeSpec
    per_episode: tuple[EpisodeResult, ...]


def sample_episode(data: EmbeddingSet, spec: EpisodeSpec, episode_index: int) -> Episode:
    """Seeded draw keyed by (spec.seed, episode_index).

    Subjects are drawn uniformly without replacement from those having at
    least k_shot + 1 images; per subject, k_shot + 1 distinct images are
    drawn and the last one becomes the query.
    """
    if episode_index < 0:
        raise InvalidSpecError(f"episode_index must be >= 0, got {episode_index}")
    need = spec.k_shot + 1
    eligible = data.eligible_subjects(need)
    if len(eligible) < spec.n_way:
        raise InsufficientDataError(
            f"need n_way={spec.n_way} subjects with >= k_shot+1={need} images, "
            f"only {len(eligible)} eligible"
        )
    rng = spawn_rng(spec.seed, episode_index)
    chosen = rng.choice(len(eligible), size=spec.n_way, replace=False)
    supports: list[tuple[str, str]] = []
    queries: list[tuple[str, str]] = []
    for k in chosen:
        subject = eligible[int(k)]
        rows = data.groups[subject]
        picked = rng.choice(len(rows), size=need, replace=False)
        drawn = [rows[int(i)] for i in picked]
        supports.extend((subject, data.images[r]) for r in drawn[:-1])
        queries.append((subject, data.images[drawn[-1]]))
    return Episode(tuple(supports), tuple(queries))


def _resolve(embeddings: EmbeddingSet, key: tuple[str, str]) -> int:
    try:
        return embeddings.index_of(*key)
    except KeyError:
        raise MissingEmbeddingError(f"episode record {key!r} not present in embeddings") from None


def rank_supports(
    episode: Episode, embeddings: EmbeddingSet, spec: EpisodeSpec, query_index: int
) -> list[int]:
    """Support indices ordered by ascending distance to the query.

    Equal distances keep ascending insertion order (stable sort), which is
    the full deterministic ordering rule. Returns indices into
    ``episode.supports``.
    """
    if not 0 <= query_index < len(episode.queries):
        raise InvalidSpecError(f"query_index {query_index} out of range")
    q_row = _resolve(embeddings, episode.queries[query_index])
    rows = [_resolve(embeddings, key) for key in episode.supports]
    dists = pairwise_distances(spec.distance, embeddings.vectors[[q_row]], embeddings.vectors[rows])[0]
    return [int(i) for i in np.argsort(dists, kind="stable")]


def recall_at_k(ranked_subjects: Sequence[str], query_subject: str, k_shot: int) -> float:
    """Fraction of the query subject's k_shot supports found in the top k_shot.

    Identical to Precision@K here: K records are retrieved and K are relevant.
    """
    if k_shot < 1 or k_shot > len(ranked_subjects):
        raise InvalidSpecError(f"k_shot must lie in [1, {len(ranked_subjects)}], got {k_shot}")
    hits = sum(1 for s in ranked_subjects[:k_shot] if s == query_subject)
    return hits / k_shot


def hit_at_r(ranked_subjects: Sequence[str], query_subject: str, r: int) -> int:
    """1 when any of the top r ranked supports shares the query's subject."""
    if r < 1 or r > len(ranked_subjects):
        raise InvalidSpecError(f"r must lie in [1, {len(ranked_subjects)}], got {r}")
    return int(any(s == query_subject for s in ranked_subjects[:r]))


def episode_result(episode: Episode, embeddings: EmbeddingSet, spec: EpisodeSpec) -> EpisodeResult:
    """Metrics for one episode: means over its n_way queries."""
    recalls = []
    hits = {r: [] for r in spec.hit_rs}
    for qi, (q_subject, _) in enumerate(episode.queries):
        order = rank_supports(episode, embeddings, spec, qi)
        ranked_subjects = [episode.supports[i][0] for i in order]
        recalls.append(recall_at_k(ranked_subjects, q_subject, spec.k_shot))
        for r in spec.hit_rs:
            hits[r].append(hit_at_r(ranked_subjects, q_subject, r))
    return EpisodeResult(
        float(np.mean(recalls)), {r: float(np.mean(v)) for r, v in hits.items()}
    )


def evaluate(embeddings: EmbeddingSet, spec: EpisodeSpec) -> AggregateReport:
    """Run ``spec.episodes`` seeded episodes and aggregate the metrics.

    Deterministic: identical (embeddings, spec) yield identical reports.
    """
    results = [
        episode_result(sample_episode(embeddings, spec, e), embeddings, spec)
        for e in range(spec.episodes)
    ]
    recalls = np.array([r.recall_at_k for r in results])
    report = AggregateReport(
        m_recall_at_k=float(np.mean(recalls)),
        recall_std=float(np.std(recalls)),
        m_hit_at_r={},
        hit_std={},
        episodes=spec.episodes,
        spec=spec,
        per_episode=tuple(results),
    )
    for r in spec.hit_rs:
        vals = np.array([res.hit_at_r[r] for res in results])
        report.m_hit_at_r[r] = float(np.mean(vals))
        report.hit_std[r] = float(np.std(vals))
    return report
