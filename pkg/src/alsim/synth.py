"""Synthetic task generator: long-tailed unit-sphere clusters.

Produces a training pool whose per-class counts follow a power-law tail
(class c count proportional to (c+1)^-gamma), a balanced test set, and a
domain-shifted retrieved pool sharing the class identities, all fully
determined by the seed. Serves as the desk-scale stand-in for real
embedding dumps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FeaturePool, l2_normalize
from .errors import InfeasibleSpecError, InvalidInputError


@dataclass(frozen=True)
class SynthSpec:
    num_classes: int = 20
    dim: int = 32
    spread: float = 0.35
    tail_exponent: float = 1.0
    pool_size: int = 2000
    test_per_class: int = 20
    retrieved_max: int = 100
    domain_gap: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise InvalidInputError("num_classes must be >= 2")
        if self.dim < 2:
            raise InvalidInputError("dim must be >= 2")
        if min(self.pool_size, self.test_per_class, self.retrieved_max) < 1:
            raise InvalidInputError("sizes must be >= 1")
        if self.spread < 0 or self.tail_exponent < 0 or self.domain_gap < 0:
            raise InvalidInputError("spread, tail_exponent, domain_gap must be >= 0")


@dataclass(frozen=True)
class SynthTask:
    train: FeaturePool
    test: FeaturePool
    retrieved: FeaturePool
    prototypes: np.ndarray  # true class means, unit rows


def tail_allocation(total: int, num_classes: int, gamma: float) -> np.ndarray:
    """Integer per-class counts proportional to (c+1)^-gamma summing to total.

    Real-valued quotas are floored, then the remainder goes to the
    largest fractional parts (ties to the lower class index), making the
    allocation exactly reproducible.
    """
    weights = (np.arange(1, num_classes + 1, dtype=np.float64)) ** (-gamma)
    quotas = total * weights / weights.sum()
    counts = np.floor(quotas).astype(np.int64)
    remainder = total - int(counts.sum())
    frac = quotas - np.floor(quotas)
    order = np.lexsort((np.arange(num_classes), -frac))
    counts[order[:remainder]] += 1
    return counts


def retrieved_allocation(retrieved_max: int, num_classes: int, gamma: float) -> np.ndarray:
    """Per-class retrieved counts: floor(retrieved_max * (c+1)^-gamma).

    The head class gets exactly retrieved_max; tail classes may get zero,
    mirroring how little open data exists for rare classes.
    """
    weights = (np.arange(1, num_classes + 1, dtype=np.float64)) ** (-gamma)
    return np.floor(retrieved_max * weights).astype(np.int64)


def generate_task(spec: SynthSpec) -> SynthTask:
    """Deterministically generate train/test/retrieved pools and prototypes."""
    rng = np.random.default_rng(spec.seed)
    means = l2_normalize(rng.standard_normal((spec.num_classes, spec.dim)))
    offsets = l2_normalize(rng.standard_normal((spec.num_classes, spec.dim)))
    shifted = l2_normalize(means + spec.domain_gap * offsets)

    train_counts = tail_allocation(spec.pool_size, spec.num_classes, spec.tail_exponent)
    if train_counts.min() < 1:
        empty = int(np.argmin(train_counts))
        raise InfeasibleSpecError(
            f"class {empty} rounds to zero training examples; grow pool_size or lower tail_exponent"
        )
    retrieved_counts = retrieved_allocation(
        spec.retrieved_max, spec.num_classes, spec.tail_exponent
    )

    next_id = 0

    def sample_pool(class_means, counts):
        nonlocal next_id
        blocks, labels = [], []
        for k, count in enumerate(counts):
            if count == 0:
                continue
            noise = rng.standard_normal((int(count), spec.dim))
            blocks.append(l2_normalize(class_means[k] + spec.spread * noise))
            labels.extend([k] * int(count))
        features = np.vstack(blocks)
        ids = np.arange(next_id, next_id + len(features), dtype=np.int64)
        next_id += len(features)
        return FeaturePool(ids, features, np.array(labels), spec.num_classes)

    train = sample_pool(means, train_counts)
    test = sample_pool(means, np.full(spec.num_classes, spec.test_per_class, dtype=np.int64))
    retrieved = sample_pool(shifted, retrieved_counts)
    return SynthTask(train=train, test=test, retrieved=retrieved, prototypes=means)
