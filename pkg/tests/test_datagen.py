import numpy as np
import pytest

from src.config import PartitionPlan
from src.datagen import (
    InvalidArgumentError,
    PartitionFailureError,
    _train_counts,
    assign_alpha_groups,
    dirichlet_partition,
    export_partition_summary,
    generate_synthetic_dataset,
    label_entropy,
    max_class_proportion,
)
from src.metrics import read_rows
from src.types import LabeledDataset


def test_generate_balances_labels():
    pool = generate_synthetic_dataset(n_classes=2, dim=2, n_samples=4, class_separation=10, seed=1)
    assert sorted(pool.labels.tolist()) == [0, 0, 1, 1]
    assert pool.features.shape == (4, 2)

    pool = generate_synthetic_dataset(n_classes=7, dim=3, n_samples=101, class_separation=2, seed=5)
    counts = pool.class_counts()
    assert counts.max() - counts.min() <= 1


def test_generate_is_deterministic():
    a = generate_synthetic_dataset(3, 4, 60, 4.0, seed=7)
    b = generate_synthetic_dataset(3, 4, 60, 4.0, seed=7)
    assert a.features.tobytes() == b.features.tobytes()
    assert a.labels.tobytes() == b.labels.tobytes()


@pytest.mark.parametrize("kwargs", [
    dict(n_classes=1, dim=2, n_samples=4, class_separation=1.0, seed=0),
    dict(n_classes=2, dim=1, n_samples=4, class_separation=1.0, seed=0),
    dict(n_classes=5, dim=2, n_samples=4, class_separation=1.0, seed=0),
    dict(n_classes=2, dim=2, n_samples=4, class_separation=0.0, seed=0),
])
def test_generate_rejects_bad_arguments(kwargs):
    with pytest.raises(InvalidArgumentError):
        generate_synthetic_dataset(**kwargs)


def test_assign_alpha_groups():
    assert assign_alpha_groups(100, [0.001, 0.002, 0.005, 0.01, 0.5]).count(0.001) == 20
    assert assign_alpha_groups(4, [0.1]) == [0.1] * 4
    assert assign_alpha_groups(7, [0.1, 0.5]) == [0.1, 0.1, 0.1, 0.5, 0.5, 0.5, 0.5]
    with pytest.raises(InvalidArgumentError):
        assign_alpha_groups(4, [])


def test_partition_plan_records_remainder():
    assert PartitionPlan(n_clients=7, alpha_groups=(0.1, 0.5)).remainder_clients == 1


def _partition(alpha, n_clients=10, n_classes=10, n_samples=2000, seed=0):
    pool = generate_synthetic_dataset(n_classes, 5, n_samples, 4.0, seed=seed)
    plan = PartitionPlan(n_clients=n_clients, alpha_groups=(alpha,), seed=seed, train_fraction=0.8)
    return pool, dirichlet_partition(pool, plan)


def test_partition_conserves_every_sample():
    pool, clients = _partition(0.1, n_clients=10, n_samples=2000)
    per_class = sum(c.train.class_counts() + c.test.class_counts() for c in clients)
    assert per_class.tolist() == pool.class_counts().tolist()
    assert all(c.size > 0 for c in clients)
    # rounding is per client
    assert abs(sum(c.size for c in clients) - 0.8 * len(pool)) <= 10
    assert all(len(c.test) > 0 for c in clients)
    assert [c.client_id for c in clients] == list(range(10))


def test_partition_assigns_each_sample_once():
    features = np.arange(400, dtype=float).reshape(200, 2)
    labels = np.arange(200) % 4
    pool = LabeledDataset(features, labels, 4)
    clients = dirichlet_partition(pool, PartitionPlan(n_clients=5, alpha_groups=(0.5,), seed=3))
    seen = np.concatenate([np.concatenate([c.train.features[:, 0], c.test.features[:, 0]]) for c in clients])
    assert sorted(seen.tolist()) == features[:, 0].tolist()


def test_large_alpha_is_near_uniform():
    _, clients = _partition(1e6, n_clients=2, n_classes=2, n_samples=1000)
    for c in clients:
        counts = c.train.class_counts() + c.test.class_counts()
        assert abs(counts[0] / counts.sum() - 0.5) <= 0.02


def test_partition_is_deterministic():
    _, a = _partition(0.5, seed=11)
    _, b = _partition(0.5, seed=11)
    for x, y in zip(a, b):
        assert x.train.labels.tobytes() == y.train.labels.tobytes()
        assert x.test.features.tobytes() == y.test.features.tobytes()


def test_tiny_alpha_concentrates_clients():
    proportions = []
    for seed in range(20):
        _, clients = _partition(0.001, n_clients=10, n_classes=10, n_samples=10000, seed=seed)
        proportions.extend(max_class_proportion(c.train) for c in clients)
    assert np.median(proportions) > 0.95


def test_entropy_decreases_with_alpha():
    medians = []
    for alpha in (10.0, 1.0, 0.1, 0.01):
        entropies = []
        for seed in range(20):
            _, clients = _partition(alpha, seed=seed)
            entropies.append(np.mean([label_entropy(c.train) for c in clients]))
        medians.append(np.median(entropies))
    assert all(a >= b for a, b in zip(medians, medians[1:]))


def test_small_allocations_keep_a_test_sample():
    counts = np.array([[1, 0], [1, 1], [2, 0], [3, 2], [0, 0]])
    train = _train_counts(counts, 0.8)
    assert train.tolist() == [[1, 0], [1, 0], [1, 0], [2, 2], [0, 0]]
    assert np.all(train <= counts)
    has_test = (counts - train).sum(axis=1) > 0
    assert has_test.tolist() == [False, True, True, True, False]


def test_train_share_is_stratified_per_client(rng):
    counts = rng.integers(0, 50, size=(30, 6))
    train = _train_counts(counts, 0.8)
    assert np.all(train <= counts)
    for row, share in zip(counts, train):
        total = row.sum()
        if total >= 2:
            assert share.sum() == min(max(int(np.floor(0.8 * total + 0.5)), 1), total - 1)
            assert np.all(np.abs(share - 0.8 * row) <= 1.5)


def test_partition_fails_when_clients_outnumber_samples():
    pool = generate_synthetic_dataset(2, 2, 10, 4.0, seed=0)
    with pytest.raises(PartitionFailureError):
        dirichlet_partition(pool, PartitionPlan(n_clients=50, alpha_groups=(1.0,), seed=0))


def test_export_partition_summary(tmp_path):
    _, clients = _partition(0.5, n_clients=6, n_classes=3, n_samples=300)
    path = export_partition_summary(clients, tmp_path / "partition.csv")
    rows = read_rows(path)
    assert list(rows[0]) == ["client_id", "alpha", "size", "test_size", "class_0", "class_1", "class_2"]
    assert len(rows) == 6
    assert sum(int(r["class_0"]) + int(r["class_1"]) + int(r["class_2"]) for r in rows) == 300
    assert [int(r["size"]) for r in rows] == [c.size for c in clients]
