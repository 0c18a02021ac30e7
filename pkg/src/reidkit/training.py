"""Siamese training loop for the encoder.

Each step samples a batch of subjects, draws two distinct images per subject
(first anchor, second positive), pushes both sides through the same
parameters, mines hard negatives among the embedded anchors, and descends
the mean hinge triplet loss. Steps whose mining drops every pair apply no
update. Given identical inputs and config, the loss sequence is bit-exact
reproducible on one platform.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field

import numpy as np

from ._rng import derive_seed, spawn_rng
from .core import EmbeddingSet
from .encoder import (
    EncoderModel,
    backward_pass,
    checkpoint_bytes,
    forward_pass,
    l2_normalize_backward,
    l2_normalize_rows,
)
from .errors import DimensionError, InsufficientDataError, InvalidSpecError
from .triplets import LossConfig, MinedTriplets, TripletBatch, batch_loss, mine_hard_triplets

OPTIMIZERS = ("sgd", "adam")


@dataclass(frozen=True)
class TrainConfig:
    subjects_per_batch: int = 32
    steps: int = 1000
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    loss: LossConfig = field(default_factory=LossConfig)
    seed: int = 0
    l2_normalize_output: bool = False

    def __post_init__(self):
        if self.subjects_per_batch < 2:
            raise InvalidSpecError(
                f"subjects_per_batch must be >= 2, got {self.subjects_per_batch}"
            )
        if self.steps < 1:
            raise InvalidSpecError(f"steps must be >= 1, got {self.steps}")
        if not np.isfinite(self.learning_rate) or self.learning_rate < 0:
            raise InvalidSpecError(
                f"learning_rate must be finite and >= 0, got {self.learning_rate}"
            )
        if self.optimizer not in OPTIMIZERS:
            raise InvalidSpecError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise InvalidSpecError("adam betas must lie in [0, 1)")
        if self.eps <= 0:
            raise InvalidSpecError(f"eps must be > 0, got {self.eps}")


@dataclass
class TrainReport:
    """Per-step history plus a checksum of the final checkpoint bytes."""

    losses: list[float] = field(default_factory=list)
    survivors: list[int] = field(default_factory=list)
    dropped: list[int] = field(default_factory=list)
    model_checksum: str = ""
    step_seconds: list[float] = field(default_factory=list)


def sample_pair_rows(inputs: EmbeddingSet, eligible, n_subjects: int, rng):
    """Anchor/positive row indices for ``n_subjects`` distinct subjects.

    Subjects are drawn without replacement from ``eligible``; per subject two
    distinct images are drawn uniformly, first anchor then positive.
    """
    picks = rng.choice(len(eligible), size=n_subjects, replace=False)
    anchor_rows, positive_rows, ids = [], [], []
    for k in picks:
        subject = eligible[int(k)]
        rows = inputs.groups[subject]
        a, p = rng.choice(len(rows), size=2, replace=False)
        anchor_rows.append(rows[int(a)])
        positive_rows.append(rows[int(p)])
        ids.append(subject)
    return anchor_rows, positive_rows, ids


def forward_pair_batch(weights, biases, activation: str, l2: bool, xa: np.ndarray, xp: np.ndarray):
    """Embed anchors and positives with the same parameters (Siamese).

    Returns (za, zp, ctx); ctx carries what the backward pass needs.
    """
    ya, cache_a = forward_pass(weights, biases, activation, xa)
    yp, cache_p = forward_pass(weights, biases, activation, xp)
    ctx = {"cache_a": cache_a, "cache_p": cache_p, "l2": l2}
    if l2:
        za, norms_a = l2_normalize_rows(ya)
        zp, norms_p = l2_normalize_rows(yp)
        ctx.update({"za": za, "zp": zp, "norms_a": norms_a, "norms_p": norms_p})
        return za, zp, ctx
    return ya, yp, ctx


def loss_for_params(weights, biases, activation, l2, xa, xp, ids, mined: MinedTriplets, loss_cfg: LossConfig) -> float:
    """Mean triplet loss for a fixed mined triple set; pure float64.

    This is the scalar function the gradient path differentiates, kept
    separate so finite-difference checks can call it directly.
    """
    za, zp, _ = forward_pair_batch(weights, biases, activation, l2, xa, xp)
    return batch_loss(TripletBatch(za, zp, tuple(ids)), mined, loss_cfg).loss


def grads_for_params(weights, biases, activation, l2, ctx, za, zp, ids, mined: MinedTriplets, loss_cfg: LossConfig):
    """(loss, grad_weights, grad_biases) for a fixed mined triple set.

    Parameter gradients from the anchor and positive passes are summed, as
    both passes share parameters.
    """
    res = batch_loss(TripletBatch(za, zp, tuple(ids)), mined, loss_cfg)
    ga, gp = res.grad_anchors, res.grad_positives
    if ctx["l2"]:
        ga = l2_normalize_backward(ga, ctx["za"], ctx["norms_a"])
        gp = l2_normalize_backward(gp, ctx["zp"], ctx["norms_p"])
    gw_a, gb_a, _ = backward_pass(weights, activation, ctx["cache_a"], ga)
    gw_p, gb_p, _ = backward_pass(weights, activation, ctx["cache_p"], gp)
    grad_ws = [a + b for a, b in zip(gw_a, gw_p)]
    grad_bs = [a + b for a, b in zip(gb_a, gb_p)]
    return res.loss, grad_ws, grad_bs


class _Sgd:
    def __init__(self, config: TrainConfig):
        self.lr = config.learning_rate

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


class _Adam:
    def __init__(self, config: TrainConfig, params):
        self.lr = config.learning_rate
        self.b1, self.b2, self.eps = config.beta1, config.beta2, config.eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0  # counts applied updates; zero-survivor steps do not advance it

    def step(self, params, grads):
        self.t += 1
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            m_hat = m / (1.0 - self.b1 ** self.t)
            v_hat = v / (1.0 - self.b2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def train(model: EncoderModel, inputs: EmbeddingSet, config: TrainConfig):
    """Train a copy of ``model`` on ``inputs``; returns (trained_model, report).

    The input model is not modified. The returned model carries
    ``config.l2_normalize_output`` as its default encode flag.
    """
    if inputs.dim != model.in_dim:
        raise DimensionError(f"model expects dim {model.in_dim}, set has dim {inputs.dim}")
    eligible = inputs.eligible_subjects(2)
    if len(eligible) < config.subjects_per_batch:
        raise InsufficientDataError(
            f"need subjects_per_batch={config.subjects_per_batch} subjects with >= 2 "
            f"images, only {len(eligible)} eligible"
        )
    weights, biases = model.params64()
    params = weights + biases
    opt = _Adam(config, params) if config.optimizer == "adam" else _Sgd(config)
    report = TrainReport()
    vectors = inputs.vectors
    for step in range(config.steps):
        t0 = time.perf_counter()
        rng = spawn_rng(config.seed, step)
        rows_a, rows_p, ids = sample_pair_rows(inputs, eligible, config.subjects_per_batch, rng)
        xa = vectors[rows_a].astype(np.float64)
        xp = vectors[rows_p].astype(np.float64)
        za, zp, ctx = forward_pair_batch(
            weights, biases, model.activation, config.l2_normalize_output, xa, xp
        )
        mined = mine_hard_triplets(
            TripletBatch(za, zp, tuple(ids)), config.loss, derive_seed(config.seed, step, 1)
        )
        loss, grad_ws, grad_bs = grads_for_params(
            weights, biases, model.activation, config.l2_normalize_output,
            ctx, za, zp, ids, mined, config.loss,
        )
        report.losses.append(loss)
        report.survivors.append(len(mined.survivors))
        report.dropped.append(len(mined.dropped))
        if mined.triples:
            opt.step(params, grad_ws + grad_bs)
        report.step_seconds.append(time.perf_counter() - t0)
    trained = EncoderModel(
        model.layer_dims,
        [w.astype(np.float32) for w in weights],
        [b.astype(np.float32) for b in biases],
        model.activation,
        l2_normalize=config.l2_normalize_output,
    )
    report.model_checksum = hashlib.sha256(checkpoint_bytes(trained)).hexdigest()
    return trained, report
