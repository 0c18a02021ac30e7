"""Training loop: sampling, pipeline gradients, optimizers, determinism."""

import numpy as np
import pytest

import reidkit as rk
from reidkit import (
    EmbeddingSet,
    InsufficientDataError,
    InvalidSpecError,
    LossConfig,
    MinedTriplets,
    TrainConfig,
    init_encoder,
    mine_hard_triplets,
)
from reidkit._rng import spawn_rng
from reidkit.encoder import checkpoint_bytes
from reidkit.training import (
    forward_pair_batch,
    grads_for_params,
    loss_for_params,
    sample_pair_rows,
)
from reidkit.triplets import TripletBatch


def _clustered_set(n_subjects, images, dim, seed, spread=0.3):
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(n_subjects, dim)) * 3.0
    subs, imgs, vecs = [], [], []
    for s in range(n_subjects):
        for k in range(images):
            subs.append(f"s{s:03d}")
            imgs.append(f"i{k}")
            vecs.append(centers[s] + rng.normal(size=dim) * spread)
    return EmbeddingSet.from_arrays(dim, subs, imgs, np.array(vecs, dtype=np.float32))


def test_config_validation():
    TrainConfig(learning_rate=0.0)
    with pytest.raises(InvalidSpecError):
        TrainConfig(learning_rate=-1e-3)
    with pytest.raises(InvalidSpecError):
        TrainConfig(steps=0)
    with pytest.raises(InvalidSpecError):
        TrainConfig(subjects_per_batch=1)
    with pytest.raises(InvalidSpecError):
        TrainConfig(optimizer="lbfgs")
    with pytest.raises(InvalidSpecError):
        TrainConfig(beta1=1.0)


def test_sample_pair_rows_properties():
    data = _clustered_set(10, 4, 3, 0)
    eligible = data.eligible_subjects(2)
    rng = spawn_rng(123, 0)
    anchors, positives, ids = sample_pair_rows(data, eligible, 6, rng)
    assert len(anchors) == len(positives) == len(ids) == 6
    assert len(set(ids)) == 6
    for a, p, sid in zip(anchors, positives, ids):
        assert a != p
        assert a in data.groups[sid] and p in data.groups[sid]
    # same stream state must replay the same choice
    again = sample_pair_rows(data, eligible, 6, spawn_rng(123, 0))
    assert again == (anchors, positives, ids)


def test_pipeline_gradients_match_finite_differences():
    # end-to-end check through encoder, optional normalization, and loss,
    # with the mined triples frozen so the objective is differentiable
    data = _clustered_set(6, 3, 4, 1)
    eligible = data.eligible_subjects(2)
    for l2 in (False, True):
        model = init_encoder([4, 3, 2], "relu", 5)
        weights, biases = model.params64()
        rng = spawn_rng(9, 0)
        rows_a, rows_p, ids = sample_pair_rows(data, eligible, 5, rng)
        xa = data.vectors[rows_a].astype(np.float64)
        xp = data.vectors[rows_p].astype(np.float64)
        cfg = LossConfig(margin=0.4)
        za, zp, ctx = forward_pair_batch(weights, biases, "relu", l2, xa, xp)
        mined = mine_hard_triplets(TripletBatch(za, zp, tuple(ids)), cfg, 0)
        assert mined.triples
        loss, grad_ws, grad_bs = grads_for_params(
            weights, biases, "relu", l2, ctx, za, zp, ids, mined, cfg
        )
        assert loss > 0.0

        h = 1e-4
        checked = 0
        for li in range(len(weights)):
            for idx in np.ndindex(weights[li].shape):
                ws = [w.copy() for w in weights]
                ws[li][idx] += h
                hi = loss_for_params(ws, biases, "relu", l2, xa, xp, ids, mined, cfg)
                ws[li][idx] -= 2 * h
                lo = loss_for_params(ws, biases, "relu", l2, xa, xp, ids, mined, cfg)
                fd = (hi - lo) / (2 * h)
                if abs(fd) > 1e-6:
                    assert abs(grad_ws[li][idx] - fd) / abs(fd) < 1e-3
                    checked += 1
            for idx in np.ndindex(biases[li].shape):
                bs = [b.copy() for b in biases]
                bs[li][idx] += h
                hi = loss_for_params(weights, bs, "relu", l2, xa, xp, ids, mined, cfg)
                bs[li][idx] -= 2 * h
                lo = loss_for_params(weights, bs, "relu", l2, xa, xp, ids, mined, cfg)
                fd = (hi - lo) / (2 * h)
                if abs(fd) > 1e-6:
                    assert abs(grad_bs[li][idx] - fd) / abs(fd) < 1e-3
                    checked += 1
        assert checked > 10


def test_zero_learning_rate_keeps_params_bit_identical():
    data = _clustered_set(8, 3, 4, 2)
    model = init_encoder([4, 4, 2], "relu", 3)
    cfg = TrainConfig(subjects_per_batch=4, steps=20, learning_rate=0.0, optimizer="sgd", seed=1)
    trained, report = rk.train(model, data, cfg)
    assert len(report.losses) == 20
    for w0, w1 in zip(model.weights, trained.weights):
        assert np.array_equal(w0, w1)
    for b0, b1 in zip(model.biases, trained.biases):
        assert np.array_equal(b0, b1)


def test_training_is_deterministic():
    data = _clustered_set(8, 3, 4, 4)
    cfg = TrainConfig(subjects_per_batch=4, steps=30, seed=5)
    t1, r1 = rk.train(init_encoder([4, 4, 2], "relu", 0), data, cfg)
    t2, r2 = rk.train(init_encoder([4, 4, 2], "relu", 0), data, cfg)
    assert r1.losses == r2.losses
    assert r1.model_checksum == r2.model_checksum
    for w1, w2 in zip(t1.weights, t2.weights):
        assert np.array_equal(w1, w2)
    t3, r3 = rk.train(init_encoder([4, 4, 2], "relu", 0), data, TrainConfig(
        subjects_per_batch=4, steps=30, seed=6))
    assert r3.losses != r1.losses


def test_checksum_matches_checkpoint_bytes():
    import hashlib

    data = _clustered_set(8, 3, 4, 6)
    cfg = TrainConfig(subjects_per_batch=4, steps=5, seed=2)
    trained, report = rk.train(init_encoder([4, 3, 2], "relu", 1), data, cfg)
    assert report.model_checksum == hashlib.sha256(checkpoint_bytes(trained)).hexdigest()


def test_all_dropped_steps_apply_no_update():
    # clusters so tight and far apart that every pair's positive is closer
    # than any other anchor: nothing survives mining, params never move
    data = _clustered_set(6, 3, 4, 7, spread=1e-4)
    model = init_encoder([4, 3, 2], "relu", 2)
    cfg = TrainConfig(subjects_per_batch=4, steps=10, learning_rate=0.5, optimizer="adam", seed=3)
    trained, report = rk.train(model, data, cfg)
    assert all(d == 4 for d in report.dropped)
    assert all(s == 0 for s in report.survivors)
    assert all(l == 0.0 for l in report.losses)
    for w0, w1 in zip(model.weights, trained.weights):
        assert np.array_equal(w0, w1)


def test_insufficient_subjects_raises():
    data = _clustered_set(3, 3, 4, 8)
    with pytest.raises(InsufficientDataError):
        rk.train(init_encoder([4, 3, 2], "relu", 0), data, TrainConfig(subjects_per_batch=8))


def test_dim_mismatch_raises():
    data = _clustered_set(8, 3, 4, 9)
    with pytest.raises(Exception):
        rk.train(init_encoder([5, 3, 2], "relu", 0), data, TrainConfig(subjects_per_batch=4))


def test_loss_decreases_on_scrambled_data():
    spec = rk.SyntheticSpec(n_subjects=80, images_per_subject=4, input_dim=16,
                            cluster_std=0.15, scramble=True, seed=21)
    train_set, _, _ = rk.generate_synthetic(spec)
    model = init_encoder([16, 32, 8], "relu", 4)
    cfg = TrainConfig(subjects_per_batch=16, steps=400, learning_rate=1e-3, seed=0)
    _, report = rk.train(model, train_set, cfg)
    tenth = len(report.losses) // 10
    assert np.median(report.losses[-tenth:]) < np.median(report.losses[:tenth])


def test_optimizers_differ_but_both_learn():
    data = _clustered_set(12, 4, 6, 10, spread=2.0)
    base = dict(subjects_per_batch=8, steps=150, learning_rate=1e-2, seed=4)
    t_sgd, r_sgd = rk.train(init_encoder([6, 8, 4], "relu", 7), data,
                            TrainConfig(optimizer="sgd", **base))
    t_adam, r_adam = rk.train(init_encoder([6, 8, 4], "relu", 7), data,
                              TrainConfig(optimizer="adam", **base))
    assert r_sgd.losses != r_adam.losses
    for report in (r_sgd, r_adam):
        tenth = len(report.losses) // 10
        assert np.mean(report.losses[-tenth:]) < np.mean(report.losses[:tenth])


def test_l2_normalize_output_flag_carries_to_model():
    data = _clustered_set(8, 3, 4, 11)
    cfg = TrainConfig(subjects_per_batch=4, steps=10, seed=0, l2_normalize_output=True)
    trained, _ = rk.train(init_encoder([4, 3, 2], "relu", 0), data, cfg)
    assert trained.l2_normalize
    out = rk.encode(trained, data)
    norms = np.linalg.norm(out.vectors.astype(np.float64), axis=1)
    assert np.allclose(norms, 1.0, rtol=1e-5)


def test_report_timing_recorded():
    data = _clustered_set(8, 3, 4, 12)
    _, report = rk.train(init_encoder([4, 3, 2], "relu", 0), data,
                         TrainConfig(subjects_per_batch=4, steps=5, seed=0))
    assert len(report.step_seconds) == 5
    assert all(t >= 0.0 for t in report.step_seconds)
