"""Embedding containers and the distance functions every other module shares.

Vectors are stored as float32; all distance arithmetic accumulates in float64
with a single fixed summation order (ascending coordinate index). The batched
paths reduce each row exactly the way the scalar path reduces a vector, so
``pairwise_distances`` agrees with ``distance`` bit for bit and
``d(x, y) == d(y, x)`` holds with zero ulp of slack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    DataValidationError,
    DegenerateVectorError,
    DimensionError,
    DuplicateRecordError,
)

#: Embedding width used when callers do not pick one.
DEFAULT_DIM = 128


class DistanceKind(str, Enum):
    """Supported vector distances. Euclidean is the training default."""

    EUCLIDEAN = "euclidean"
    SQUARED_EUCLIDEAN = "squared_euclidean"
    COSINE_DISTANCE = "cosine_distance"


def validate_subject_id(subject: str) -> str:
    if not isinstance(subject, str) or not subject or any(c.isspace() for c in subject):
        raise DataValidationError(
            f"subject id must be a non-empty token without whitespace, got {subject!r}"
        )
    return subject


def validate_image_id(image: str) -> str:
    if not isinstance(image, str) or not image:
        raise DataValidationError(f"image id must be a non-empty string, got {image!r}")
    return image


@dataclass(frozen=True)
class EmbeddingRecord:
    """One embedding vector tagged with its subject and image tokens."""

    subject: str
    image: str
    vector: np.ndarray


def _vec64(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] < 1:
        raise DimensionError(f"{name} must be 1-D with length >= 1, got shape {arr.shape}")
    return arr


def _rows64(rows, name: str) -> np.ndarray:
    try:
        arr = np.asarray(rows, dtype=np.float64)
    except ValueError as exc:
        raise DimensionError(f"{name} rows have inconsistent lengths") from exc
    if arr.ndim == 1:
        raise DimensionError(f"{name} must be a sequence of vectors or a 2-D array")
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must be 2-D with width >= 1, got shape {arr.shape}")
    return arr


def _sq_dists_to_rows(x: np.ndarray, rows: np.ndarray) -> np.ndarray:
    # One reduction order shared by the scalar and batched code paths.
    diff = rows - x
    return np.sum(diff * diff, axis=1)


def _row_norms(rows: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(rows * rows, axis=1))


def _cos_dists_to_rows(x, rows, x_norm, row_norms) -> np.ndarray:
    dots = np.sum(rows * x, axis=1)
    return np.clip(1.0 - dots / (x_norm * row_norms), 0.0, 2.0)


def distance(kind: DistanceKind | str, x, y) -> float:
    """Distance between two vectors under ``kind``.

    Accumulates in float64 regardless of input dtype and returns a
    nonnegative float. Cosine distance is 1 - cos(x, y), lies in [0, 2],
    and rejects zero vectors.
    """
    kind = DistanceKind(kind)
    x64 = _vec64(x, "x")
    y64 = _vec64(y, "y")
    if x64.shape[0] != y64.shape[0]:
        raise DimensionError(f"length mismatch: {x64.shape[0]} vs {y64.shape[0]}")
    rows = y64[np.newaxis, :]
    if kind is DistanceKind.COSINE_DISTANCE:
        xn = float(_row_norms(x64[np.newaxis, :])[0])
        yn = _row_norms(rows)
        if xn == 0.0 or yn[0] == 0.0:
            raise DegenerateVectorError("cosine distance is undefined for zero vectors")
        return float(_cos_dists_to_rows(x64, rows, xn, yn)[0])
    sq = float(_sq_dists_to_rows(x64, rows)[0])
    if kind is DistanceKind.EUCLIDEAN:
        return math.sqrt(sq)
    return sq


def pairwise_distances(kind: DistanceKind | str, a_rows, b_rows) -> np.ndarray:
    """Matrix D with D[i, j] == distance(kind, a_rows[i], b_rows[j]).

    Every entry is produced by the same float64 kernel as the scalar
    ``distance``, so the two agree bit-exactly. When both arguments are the
    same sequence the result is symmetric with a zero diagonal for the
    euclidean kinds.
    """
    kind = DistanceKind(kind)
    A = _rows64(a_rows, "a_rows")
    B = _rows64(b_rows, "b_rows")
    if A.shape[1] != B.shape[1]:
        raise DimensionError(f"width mismatch: {A.shape[1]} vs {B.shape[1]}")
    out = np.empty((A.shape[0], B.shape[0]), dtype=np.float64)
    if kind is DistanceKind.COSINE_DISTANCE:
        a_norms = _row_norms(A)
        b_norms = _row_norms(B)
        if np.any(a_norms == 0.0) or np.any(b_norms == 0.0):
            raise DegenerateVectorError("cosine distance is undefined for zero vectors")
        for i in range(A.shape[0]):
            out[i] = _cos_dists_to_rows(A[i], B, float(a_norms[i]), b_norms)
        return out
    for i in range(A.shape[0]):
        out[i] = _sq_dists_to_rows(A[i], B)
    if kind is DistanceKind.EUCLIDEAN:
        np.sqrt(out, out=out)
    return out


class EmbeddingSet:
    """Ordered, immutable collection of subject-tagged embedding vectors.

    Iteration follows insertion order; seeded samplers depend on that.
    (subject, image) pairs are unique within a set, vectors are float32 and
    finite, and the backing array is write-protected after construction.
    """

    __slots__ = ("_dim", "_subjects", "_images", "_vectors", "_groups", "_index")

    def __init__(self, dim: int, records: Iterable[EmbeddingRecord] = ()):
        recs = list(records)
        subjects = [r.subject for r in recs]
        images = [r.image for r in recs]
        rows = []
        for r in recs:
            vec = np.asarray(r.vector, dtype=np.float32)
            if vec.ndim != 1 or vec.shape[0] != dim:
                raise DimensionError(
                    f"record ({r.subject!r}, {r.image!r}) has shape {vec.shape}, expected ({dim},)"
                )
            rows.append(vec)
        vectors = np.vstack(rows) if rows else np.empty((0, dim), dtype=np.float32)
        self._init(dim, subjects, images, vectors)

    @classmethod
    def from_arrays(cls, dim: int, subjects: Sequence[str], images: Sequence[str], vectors) -> "EmbeddingSet":
        obj = object.__new__(cls)
        obj._init(dim, list(subjects), list(images), np.asarray(vectors, dtype=np.float32))
        return obj

    def _init(self, dim: int, subjects: list, images: list, vectors: np.ndarray) -> None:
        if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
            raise DimensionError(f"dim must be a positive integer, got {dim!r}")
        vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        if vectors.size == 0:
            vectors = vectors.reshape(0, dim)
        if vectors.ndim != 2 or vectors.shape[1] != dim:
            raise DimensionError(f"vectors must have shape (n, {dim}), got {vectors.shape}")
        if len(subjects) != vectors.shape[0] or len(images) != vectors.shape[0]:
            raise DimensionError("subjects, images, and vectors must have equal length")
        if not np.all(np.isfinite(vectors)):
            raise DataValidationError("vectors must be finite (no NaN/Inf)")
        groups: dict[str, list[int]] = {}
        index: dict[tuple[str, str], int] = {}
        for i, (s, m) in enumerate(zip(subjects, images)):
            validate_subject_id(s)
            validate_image_id(m)
            key = (s, m)
            if key in index:
                raise DuplicateRecordError(f"duplicate (subject, image) pair {key!r}")
            index[key] = i
            groups.setdefault(s, []).append(i)
        vectors.setflags(write=False)
        self._dim = dim
        self._subjects = tuple(subjects)
        self._images = tuple(images)
        self._vectors = vectors
        self._groups = {s: tuple(rows) for s, rows in groups.items()}
        self._index = index

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def subjects(self) -> tuple[str, ...]:
        """Subject token of every record, aligned with ``vectors`` rows."""
        return self._subjects

    @property
    def images(self) -> tuple[str, ...]:
        return self._images

    @property
    def vectors(self) -> np.ndarray:
        """(n, dim) float32 array, write-protected."""
        return self._vectors

    @property
    def groups(self) -> Mapping[str, tuple[int, ...]]:
        """Row indices per subject, in first-appearance order. Do not mutate."""
        return self._groups

    def subject_ids(self) -> tuple[str, ...]:
        return tuple(self._groups)

    def eligible_subjects(self, min_images: int) -> tuple[str, ...]:
        return tuple(s for s, rows in self._groups.items() if len(rows) >= min_images)

    def index_of(self, subject: str, image: str) -> int:
        """Row index of the (subject, image) record. KeyError when absent."""
        return self._index[(subject, image)]

    def __contains__(self, key: tuple[str, str]) -> bool:
        return key in self._index

    def __len__(self) -> int:
        return self._vectors.shape[0]

    def __getitem__(self, i: int) -> EmbeddingRecord:
        return EmbeddingRecord(self._subjects[i], self._images[i], self._vectors[i])

    def __iter__(self) -> Iterator[EmbeddingRecord]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingSet):
            return NotImplemented
        return (
            self._dim == other._dim
            and self._subjects == other._subjects
            and self._images == other._images
            and np.array_equal(self._vectors, other._vectors)
        )

    def __repr__(self) -> str:
        return f"EmbeddingSet(dim={self._dim}, records={len(self)}, subjects={len(self._groups)})"

    def subset(self, rows: Sequence[int]) -> "EmbeddingSet":
        """New set holding the given rows in the given order."""
        rows = list(rows)
        return EmbeddingSet.from_arrays(
            self._dim,
            [self._subjects[i] for i in rows],
            [self._images[i] for i in rows],
            self._vectors[rows] if rows else np.empty((0, self._dim), dtype=np.float32),
        )
