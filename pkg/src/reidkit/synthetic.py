"""Synthetic clustered benchmark data with an optional feature scramble.

Each subject is an isotropic Gaussian cloud around a random center. The
scramble pushes every vector through one fixed, invertible map: a seeded
rotation, a mild elementwise warp, and a few high-gain saturating "cliff"
coordinates whose step width matches the cluster noise. A cluster whose
center straddles a cliff threshold has same-subject images thrown to
opposite plateaus, so nearest-neighbor retrieval on the scrambled vectors
degrades sharply, while an encoder that learns to discount the cliff
coordinates recovers the clean cluster geometry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import spawn_rng
from .core import EmbeddingSet
from .errors import InvalidSpecError

#: one cliff coordinate per this many input dimensions (at least one).
_DIMS_PER_CLIFF = 8
#: plateau amplitude of a cliff, in units of center_scale.
_CLIFF_GAIN = 16.0
#: residual linear slope that keeps each cliff coordinate invertible.
_CLIFF_LEAK = 0.05
#: cliff thresholds sit within this fraction of center_scale around zero.
_CLIFF_OFFSET = 0.3
#: coefficient of the mild quadratic warp on non-cliff coordinates.
_WARP_GAIN = 0.3


@dataclass(frozen=True)
class SyntheticSpec:
    """Generation parameters. ``seed`` fixes centers, noise, map, and split."""

    n_subjects: int = 50
    images_per_subject: int = 4
    input_dim: int = 32
    cluster_std: float = 0.05
    center_scale: float = 1.0
    scramble: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_subjects < 1:
            raise InvalidSpecError(f"n_subjects must be >= 1, got {self.n_subjects}")
        if self.images_per_subject < 2:
            raise InvalidSpecError(
                f"images_per_subject must be >= 2, got {self.images_per_subject}"
            )
        if self.input_dim < 1:
            raise InvalidSpecError(f"input_dim must be >= 1, got {self.input_dim}")
        if not np.isfinite(self.cluster_std) or self.cluster_std < 0:
            raise InvalidSpecError(f"cluster_std must be finite and >= 0, got {self.cluster_std}")
        if not np.isfinite(self.center_scale) or self.center_scale <= 0:
            raise InvalidSpecError(f"center_scale must be > 0, got {self.center_scale}")


def scramble_map(spec: SyntheticSpec):
    """The fixed entangling map for this spec's seed. Returns a row function.

    Vectors are rotated by a seeded orthogonal Q, then warped elementwise.
    Most coordinates get the mild monotone warp v + c * v * |v|; the first
    few rotated coordinates become cliffs, A * tanh((v - theta) / w) plus a
    small linear leak, with w matched to the cluster noise so that clusters
    near a threshold are split across plateaus. Every branch is strictly
    increasing, so the whole map is invertible.
    """
    d = spec.input_dim
    rng = spawn_rng(spec.seed, 2)
    gauss = rng.standard_normal((d, d))
    q, r = np.linalg.qr(gauss)
    q = q * np.sign(np.diag(r))  # fix QR sign ambiguity for determinism
    n_cliffs = max(1, d // _DIMS_PER_CLIFF)
    thetas = rng.uniform(-_CLIFF_OFFSET, _CLIFF_OFFSET, n_cliffs) * spec.center_scale
    width = max(spec.cluster_std, 1e-3 * spec.center_scale)
    gain = _CLIFF_GAIN * spec.center_scale

    def apply(rows: np.ndarray) -> np.ndarray:
        y = rows @ q.T
        z = y + _WARP_GAIN * y * np.abs(y) / spec.center_scale
        for j in range(n_cliffs):
            z[:, j] = gain * np.tanh((y[:, j] - thetas[j]) / width) + _CLIFF_LEAK * y[:, j]
        return z

    return apply


def generate_synthetic(spec: SyntheticSpec):
    """(train, val, test) EmbeddingSets split subject-wise 70/10/20.

    Subjects are assigned to splits by a seeded permutation; the three sets
    are disjoint in subjects and their union covers every generated record.
    """
    n, m, d = spec.n_subjects, spec.images_per_subject, spec.input_dim
    centers = spawn_rng(spec.seed, 0).uniform(-spec.center_scale, spec.center_scale, (n, d))
    noise = spawn_rng(spec.seed, 1).normal(0.0, 1.0, (n, m, d)) * spec.cluster_std
    data = (centers[:, np.newaxis, :] + noise).reshape(n * m, d)
    if spec.scramble:
        data = scramble_map(spec)(data)

    width = max(4, len(str(n - 1)))
    subjects = [f"s{i:0{width}d}" for i in range(n) for _ in range(m)]
    images = [f"img{k:03d}" for _ in range(n) for k in range(m)]

    perm = spawn_rng(spec.seed, 3).permutation(n)
    n_train = int(0.7 * n)
    n_val = int(0.1 * n)
    split_subjects = {
        "train": sorted(perm[:n_train].tolist()),
        "val": sorted(perm[n_train : n_train + n_val].tolist()),
        "test": sorted(perm[n_train + n_val :].tolist()),
    }

    def build(subject_indices) -> EmbeddingSet:
        rows = [s * m + k for s in subject_indices for k in range(m)]
        return EmbeddingSet.from_arrays(
            d,
            [subjects[r] for r in rows],
            [images[r] for r in rows],
            data[rows].astype(np.float32) if rows else np.empty((0, d), dtype=np.float32),
        )

    return build(split_subjects["train"]), build(split_subjects["val"]), build(split_subjects["test"])
