"""Shared data model: feature pools, labeling state, class bookkeeping.

Every cross-module reference is by example id (opaque 64-bit int), never
by row position, so pools can be filtered without invalidating anything.
All types here are immutable snapshots once constructed; the label ledger
grows functionally (``with_*`` methods return a new ledger).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateFeatureError,
    InvalidInputError,
    InvalidLedgerError,
)


class LabelSource(enum.Enum):
    """How a labeled example entered the labeled set."""

    ORACLE = "oracle"
    RETRIEVED = "retrieved"


class FeaturePool:
    """Immutable matrix of d-dimensional example embeddings.

    Holds ids, an (n, d) feature matrix, optional ground-truth class
    labels in [0, num_classes), and the task's class count.
    """

    def __init__(self, ids, features, labels=None, num_classes=None):
        ids = np.asarray(ids, dtype=np.int64)
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2:
            raise InvalidInputError(f"features must be 2-d, got shape {features.shape}")
        if ids.ndim != 1 or len(ids) != features.shape[0]:
            raise InvalidInputError(
                f"ids length {ids.shape} does not match {features.shape[0]} feature rows"
            )
        if features.shape[1] < 1:
            raise InvalidInputError("feature dimension must be positive")
        if len(np.unique(ids)) != len(ids):
            raise InvalidInputError("ids must be unique")
        if not np.all(np.isfinite(features)):
            raise InvalidInputError("features contain NaN or Inf")
        if num_classes is None or num_classes < 1:
            raise InvalidInputError("num_classes must be a positive integer")
        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64)
            if labels.shape != (features.shape[0],):
                raise InvalidInputError("labels length must match number of examples")
            if len(labels) and (labels.min() < 0 or labels.max() >= num_classes):
                raise InvalidInputError("labels must lie in [0, num_classes)")
        self.ids = ids
        self.features = features
        self.labels = labels
        self.num_classes = int(num_classes)
        self._row_of = {int(i): r for r, i in enumerate(ids)}
        self.ids.setflags(write=False)
        self.features.setflags(write=False)
        if self.labels is not None:
            self.labels.setflags(write=False)

    def __len__(self):
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def rows_for(self, ids) -> np.ndarray:
        """Row indices for the given ids, in the given order."""
        try:
            return np.array([self._row_of[int(i)] for i in ids], dtype=np.int64)
        except KeyError as exc:
            raise InvalidInputError(f"unknown example id {exc.args[0]}") from None

    def features_for(self, ids) -> np.ndarray:
        return self.features[self.rows_for(ids)]


@dataclass(frozen=True)
class LabelLedger:
    """Per-example labeling state and the round each entry was added.

    Labeled entries never transition back: re-labeling an id raises.
    Retrieved entries may only be created in round 0.
    """

    status: dict = field(default_factory=dict)  # id -> (LabelSource, class)
    round_added: dict = field(default_factory=dict)  # id -> round index

    def is_labeled(self, example_id) -> bool:
        return int(example_id) in self.status

    def label_of(self, example_id):
        """(source, class) for a labeled id, None for an unlabeled one."""
        return self.status.get(int(example_id))

    def __len__(self):
        return len(self.status)

    def with_oracle_label(self, example_id, cls, round_index) -> "LabelLedger":
        return self._extend(int(example_id), LabelSource.ORACLE, int(cls), round_index)

    def with_retrieved(self, example_id, cls, round_index=0) -> "LabelLedger":
        if round_index != 0:
            raise InvalidLedgerError(
                f"retrieved entries may only be created in round 0, not round {round_index}"
            )
        return self._extend(int(example_id), LabelSource.RETRIEVED, int(cls), round_index)

    def _extend(self, example_id, source, cls, round_index):
        if example_id in self.status:
            raise InvalidLedgerError(f"id {example_id} is already labeled")
        if cls < 0:
            raise InvalidLedgerError(f"negative class index {cls}")
        status = dict(self.status)
        rounds = dict(self.round_added)
        status[example_id] = (source, cls)
        rounds[example_id] = int(round_index)
        return LabelLedger(status, rounds)

    def ids_by_source(self, source: LabelSource) -> list:
        return sorted(i for i, (s, _) in self.status.items() if s is source)


@dataclass(frozen=True)
class ClassDistribution:
    """Length-K vector of non-negative per-class counts."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1:
            raise InvalidInputError("counts must be a 1-d sequence")
        if len(counts) and counts.min() < 0:
            raise InvalidInputError("counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    def __len__(self):
        return len(self.counts)


@dataclass
class RoundRecord:
    """Outcome of one protocol round: selections, metrics, seed/timing."""

    round: int
    selected_ids: list
    accuracy: float
    macro_f1: float
    per_class_accuracy: np.ndarray
    labeled_count: int
    seed: int
    wall_ms: float = 0.0


def class_counts(ledger: LabelLedger, include_retrieved: bool, num_classes: int) -> ClassDistribution:
    """Count labeled entries per class, optionally including retrieved ones.

    Raises InvalidLedgerError if any ledger entry has a class >= num_classes.
    """
    counts = np.zeros(num_classes, dtype=np.int64)
    for _, (source, cls) in ledger.status.items():
        if cls >= num_classes:
            raise InvalidLedgerError(
                f"ledger contains class {cls} but distribution has {num_classes} classes"
            )
        if source is LabelSource.RETRIEVED and not include_retrieved:
            continue
        counts[cls] += 1
    return ClassDistribution(counts)


def rarest_class(dist: ClassDistribution) -> int:
    """Index of the least-populated class; ties go to the lowest index."""
    if len(dist) == 0:
        raise InvalidInputError("empty class distribution has no rarest class")
    return int(np.argmin(dist.counts))


def l2_normalize(features: np.ndarray) -> np.ndarray:
    """Scale every row to unit Euclidean norm.

    Raises DegenerateFeatureError on a zero-norm row.
    """
    features = np.asarray(features, dtype=np.float64)
    single = features.ndim == 1
    mat = features[None, :] if single else features
    norms = np.linalg.norm(mat, axis=1)
    if np.any(norms == 0.0):
        bad = int(np.flatnonzero(norms == 0.0)[0])
        raise DegenerateFeatureError(f"row {bad} has zero norm and cannot be normalized")
    out = mat / norms[:, None]
    return out[0] if single else out
