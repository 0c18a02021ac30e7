"""Shared fixtures.

The end-to-end acceptance tests share one trained benchmark model; building
it costs a few seconds, so it is session-scoped and only constructed when a
test asks for it. The terminal summary prints one PASS/FAIL line per
acceptance test.
"""

import time
from types import SimpleNamespace

import pytest

import reidkit as rk

# Benchmark pinned for the acceptance gate: 600 subjects split 70/10/20 gives
# 420 train / 120 test, enough for 100-way evaluation on held-out subjects.
BENCH_SPEC = rk.SyntheticSpec(
    n_subjects=600,
    images_per_subject=4,
    input_dim=32,
    cluster_std=0.2,
    center_scale=1.0,
    scramble=True,
    seed=7,
)
BENCH_LAYERS = (32, 64, 16)
BENCH_INIT_SEED = 11
BENCH_TRAIN = rk.TrainConfig(
    subjects_per_batch=32,
    steps=2000,
    learning_rate=1e-3,
    optimizer="adam",
    seed=5,
)


@pytest.fixture(scope="session")
def benchmark():
    t0 = time.perf_counter()
    train_set, val_set, test_set = rk.generate_synthetic(BENCH_SPEC)
    model0 = rk.init_encoder(list(BENCH_LAYERS), "relu", BENCH_INIT_SEED)
    trained, report = rk.train(model0, train_set, BENCH_TRAIN)
    emb_untrained = rk.encode(model0, test_set)
    emb_trained = rk.encode(trained, test_set)
    build_seconds = time.perf_counter() - t0
    return SimpleNamespace(
        spec=BENCH_SPEC,
        train_set=train_set,
        val_set=val_set,
        test_set=test_set,
        model0=model0,
        trained=trained,
        report=report,
        emb_untrained=emb_untrained,
        emb_trained=emb_trained,
        build_seconds=build_seconds,
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if getattr(rep, "when", None) != "call":
                continue
            if "test_acceptance.py" not in rep.nodeid:
                continue
            rows.append((rep.nodeid.split("::")[-1], rep.passed))
    if not rows:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, ok in sorted(rows):
        terminalreporter.write_line(f"[acceptance] {'PASS' if ok else 'FAIL'} {name}")
