"""Synthetic pool generation and Dirichlet label-skew partitioning.

A lower alpha concentrates each client on fewer classes; clients are assigned
alpha values in contiguous groups so a single run mixes several skew levels.
"""
import csv
import logging
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np

from src.config import PartitionPlan
from src.constants import MAX_PARTITION_REDRAWS
from src.types import ClientDataset, LabeledDataset

logger = logging.getLogger("datagen")


class DatagenError(Exception):
    """Base exception for dataset generation and partitioning errors"""
    pass


class InvalidArgumentError(DatagenError, ValueError):
    pass


class PartitionFailureError(DatagenError):
    """Raised when some client still has no training data after re-draws"""
    pass


def generate_synthetic_dataset(
    n_classes: int,
    dim: int,
    n_samples: int,
    class_separation: float,
    seed: int,
) -> LabeledDataset:
    """
    Gaussian mixture with one unit-variance component per class.

    Class means are drawn at random and rescaled so the closest pair sits
    exactly class_separation apart. Labels are balanced to within one sample.
    """
    if n_classes < 2 or dim < 2:
        raise InvalidArgumentError("n_classes and dim must both be >= 2")
    if n_samples < n_classes:
        raise InvalidArgumentError("n_samples must be >= n_classes")
    if not class_separation > 0:
        raise InvalidArgumentError("class_separation must be positive")
    if seed < 0:
        raise InvalidArgumentError("seed must be non-negative")

    rng = np.random.default_rng(seed)
    means = rng.standard_normal((n_classes, dim))
    gaps = np.linalg.norm(means[:, None, :] - means[None, :, :], axis=-1)
    closest = gaps[np.triu_indices(n_classes, k=1)].min()
    means *= class_separation / closest

    labels = np.arange(n_samples) % n_classes
    rng.shuffle(labels)
    features = means[labels] + rng.standard_normal((n_samples, dim))
    return LabeledDataset(features, labels, n_classes)


def assign_alpha_groups(n_clients: int, alpha_list: Sequence[float]) -> List[float]:
    """Contiguous groups of n_clients // len(alpha_list); the remainder joins the last group"""
    if not alpha_list:
        raise InvalidArgumentError("alpha_list must be non-empty")
    if any(a <= 0 for a in alpha_list):
        raise InvalidArgumentError("every alpha must be > 0")
    if n_clients <= 0:
        raise InvalidArgumentError("n_clients must be positive")

    per_group = n_clients // len(alpha_list)
    last = len(alpha_list) - 1
    return [
        float(alpha_list[min(k // per_group, last)]) if per_group else float(alpha_list[last])
        for k in range(n_clients)
    ]


def _draw_proportions(rng: np.random.Generator, alpha: float, n_classes: int) -> np.ndarray:
    p = rng.dirichlet(np.full(n_classes, alpha))
    # Very small alphas can underflow to an all-zero or NaN draw; that limit is one-hot.
    if not np.all(np.isfinite(p)) or p.sum() <= 0:
        p = np.zeros(n_classes)
        p[rng.integers(n_classes)] = 1.0
    return p


def _largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    """Integer counts summing to total, proportional to weights; ties go to the lower index"""
    quotas = weights / weights.sum() * total
    counts = np.floor(quotas).astype(np.int64)
    short = total - int(counts.sum())
    if short:
        order = np.argsort(-(quotas - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def _allocate(
    rng: np.random.Generator,
    proportions: np.ndarray,
    class_budget: np.ndarray,
) -> np.ndarray:
    """Per-client, per-class counts; shape (n_clients, n_classes)"""
    n_clients, n_classes = proportions.shape
    counts = np.zeros((n_clients, n_classes), dtype=np.int64)
    for c in range(n_classes):
        column = proportions[:, c]
        if column.sum() > 0:
            counts[:, c] = _largest_remainder(column, int(class_budget[c]))
        else:
            # Nobody holds mass on this class: it goes whole to one client.
            counts[rng.integers(n_clients), c] = class_budget[c]
    return counts


def _train_counts(counts: np.ndarray, train_fraction: float) -> np.ndarray:
    """
    Per-client train share rounded half-up over the whole allocation, then spread
    across classes by largest remainder. A client holding two or more samples
    keeps at least one for testing; a single sample goes to training.
    """
    train = np.zeros_like(counts)
    for k, row in enumerate(counts):
        total = int(row.sum())
        if total == 0:
            continue
        n_train = int(np.floor(total * train_fraction + 0.5))
        n_train = min(max(n_train, 1), max(total - 1, 1))
        train[k] = _largest_remainder(row.astype(np.float64), n_train)
    return train


def dirichlet_partition(pool: LabeledDataset, plan: PartitionPlan) -> List[ClientDataset]:
    """
    Split every pool sample across clients with per-client Dirichlet label skew.

    Args:
        pool: the global labeled dataset; every class must be present
        plan: client count, alpha groups, seed and train fraction

    Returns:
        List[ClientDataset]: one entry per client, ordered by client_id

    Raises:
        PartitionFailureError: a client still has zero training samples
            after MAX_PARTITION_REDRAWS re-draws of its proportions
    """
    class_budget = pool.class_counts()
    if np.any(class_budget == 0):
        raise InvalidArgumentError("every class must have at least one sample in the pool")

    rng = np.random.default_rng(plan.seed)
    alphas = assign_alpha_groups(plan.n_clients, plan.alpha_groups)
    proportions = np.stack([_draw_proportions(rng, a, pool.n_classes) for a in alphas])

    for attempt in range(MAX_PARTITION_REDRAWS + 1):
        counts = _allocate(rng, proportions, class_budget)
        empty = np.flatnonzero(_train_counts(counts, plan.train_fraction).sum(axis=1) == 0)
        if empty.size == 0:
            break
        if attempt == MAX_PARTITION_REDRAWS:
            raise PartitionFailureError(
                f"Clients {empty.tolist()} have no training samples after {MAX_PARTITION_REDRAWS} re-draws"
            )
        logger.debug(f"Re-drawing proportions for empty clients {empty.tolist()} (attempt {attempt + 1})")
        for k in empty:
            proportions[k] = _draw_proportions(rng, alphas[k], pool.n_classes)

    train_counts = _train_counts(counts, plan.train_fraction)
    train_idx: List[List[np.ndarray]] = [[] for _ in range(plan.n_clients)]
    test_idx: List[List[np.ndarray]] = [[] for _ in range(plan.n_clients)]
    for c in range(pool.n_classes):
        members = np.flatnonzero(pool.labels == c)
        rng.shuffle(members)
        start = 0
        for k in range(plan.n_clients):
            take = members[start:start + counts[k, c]]
            start += counts[k, c]
            train_idx[k].append(take[:train_counts[k, c]])
            test_idx[k].append(take[train_counts[k, c]:])

    clients = []
    for k in range(plan.n_clients):
        clients.append(ClientDataset(
            client_id=k,
            alpha=alphas[k],
            train=pool.subset(np.concatenate(train_idx[k])),
            test=pool.subset(np.concatenate(test_idx[k])),
        ))
    logger.debug(f"Partitioned {len(pool)} samples across {plan.n_clients} clients")
    return clients


def label_entropy(dataset: LabeledDataset) -> float:
    """Shannon entropy (nats) of the label distribution"""
    counts = dataset.class_counts()
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def max_class_proportion(dataset: LabeledDataset) -> float:
    counts = dataset.class_counts()
    return float(counts.max() / counts.sum())


def export_partition_summary(clients: Sequence[ClientDataset], path: Union[str, Path]) -> Path:
    """One row per client: client_id, alpha, size, test_size and per-class counts"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n_classes = clients[0].train.n_classes if clients else 0
    fieldnames = ["client_id", "alpha", "size", "test_size"] + [f"class_{c}" for c in range(n_classes)]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        for client in clients:
            per_class = client.train.class_counts() + client.test.class_counts()
            row = {
                "client_id": client.client_id,
                "alpha": f"{client.alpha:.6g}",
                "size": client.size,
                "test_size": len(client.test),
            }
            row.update({f"class_{c}": int(per_class[c]) for c in range(n_classes)})
            writer.writerow(row)
    return path
