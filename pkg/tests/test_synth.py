import numpy as np
import pytest

from alsim.adapt import LinearProbe, TrainConfig, predict_proba, train
from alsim.errors import InfeasibleSpecError, InvalidInputError
from alsim.synth import (
    SynthSpec,
    generate_task,
    retrieved_allocation,
    tail_allocation,
)


def test_deterministic_given_seed():
    spec = SynthSpec(num_classes=5, dim=8, pool_size=100, test_per_class=4,
                     retrieved_max=10, seed=99)
    a = generate_task(spec)
    b = generate_task(spec)
    assert np.array_equal(a.train.features, b.train.features)
    assert np.array_equal(a.test.ids, b.test.ids)
    assert np.array_equal(a.retrieved.labels, b.retrieved.labels)
    assert np.array_equal(a.prototypes, b.prototypes)


def test_flat_exponent_gives_balanced_counts():
    counts = tail_allocation(103, 10, 0.0)
    assert counts.sum() == 103
    assert counts.max() - counts.min() <= 1


def test_tail_law_matches_closed_form():
    for total, k, gamma in [(2000, 20, 1.0), (500, 7, 0.5), (333, 4, 2.0)]:
        counts = tail_allocation(total, k, gamma)
        assert counts.sum() == total
        weights = np.arange(1, k + 1, dtype=float) ** (-gamma)
        quotas = total * weights / weights.sum()
        floors = np.floor(quotas).astype(int)
        frac = quotas - floors
        order = np.lexsort((np.arange(k), -frac))
        expected = floors.copy()
        expected[order[: total - floors.sum()]] += 1
        assert counts.tolist() == expected.tolist()
        # head-to-tail ratio approximates k**gamma up to the rounding above
        assert counts[0] >= counts[-1]


def test_generated_features_unit_norm():
    task = generate_task(SynthSpec(num_classes=4, dim=6, pool_size=80,
                                   test_per_class=3, retrieved_max=9, seed=1))
    for pool in (task.train, task.test, task.retrieved):
        norms = np.linalg.norm(pool.features, axis=1)
        assert np.abs(norms - 1.0).max() < 1e-9
    assert np.abs(np.linalg.norm(task.prototypes, axis=1) - 1.0).max() < 1e-9


def test_train_counts_follow_tail_law_exactly():
    spec = SynthSpec(num_classes=6, dim=4, pool_size=300, tail_exponent=1.0,
                     test_per_class=2, retrieved_max=5, seed=3)
    task = generate_task(spec)
    observed = np.bincount(task.train.labels, minlength=6)
    assert observed.tolist() == tail_allocation(300, 6, 1.0).tolist()


def test_retrieved_counts_capped_by_max():
    counts = retrieved_allocation(100, 20, 1.0)
    assert counts[0] == 100
    assert counts.tolist() == [int(np.floor(100 / (c + 1))) for c in range(20)]


def test_degenerate_task_is_perfectly_learnable():
    spec = SynthSpec(num_classes=4, dim=8, spread=0.0, domain_gap=0.0,
                     pool_size=40, test_per_class=5, retrieved_max=8, seed=7)
    task = generate_task(spec)
    # every example sits exactly on its class mean
    for k in range(4):
        rows = task.train.features[task.train.labels == k]
        assert np.abs(rows - task.prototypes[k]).max() < 1e-12
    model = train(LinearProbe.zeros(4, 8), task.train.features, task.train.labels,
                  TrainConfig(epochs=50, lr_head=1e-2, seed=0))
    pred = np.argmax(predict_proba(model, task.test.features), axis=1)
    assert np.array_equal(pred, task.test.labels)


def test_retrieved_pool_transfers_above_chance():
    wins = 0
    for seed in range(20):
        spec = SynthSpec(num_classes=5, dim=16, spread=0.3, domain_gap=0.15,
                         pool_size=200, test_per_class=10, retrieved_max=40, seed=seed)
        task = generate_task(spec)
        model = train(
            LinearProbe.zeros(5, 16),
            task.retrieved.features,
            task.retrieved.labels,
            TrainConfig(epochs=50, lr_head=1e-2, seed=seed),
        )
        pred = np.argmax(predict_proba(model, task.test.features), axis=1)
        accuracy = float(np.mean(pred == task.test.labels))
        if accuracy > 2.0 / 5:
            wins += 1
    assert wins == 20


def test_infeasible_allocation_rejected():
    with pytest.raises(InfeasibleSpecError):
        generate_task(SynthSpec(num_classes=50, dim=4, pool_size=60,
                                tail_exponent=3.0, test_per_class=1, retrieved_max=2))


def test_invalid_spec_rejected():
    with pytest.raises(InvalidInputError):
        SynthSpec(num_classes=1)
    with pytest.raises(InvalidInputError):
        SynthSpec(spread=-0.1)
