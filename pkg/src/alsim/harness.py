"""Round-based active-learning protocol.

Round 0 labels one example per class, optionally merges capped retrieved
data, adapts the model, and evaluates. Each later round scores the
unlabeled pool, selects a budget of examples with the configured
strategy, labels them through the oracle, removes them from the pool,
re-adapts (warm-started by default), and evaluates. Everything is a
deterministic function of (config, seed).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .adapt import LinearProbe, PrototypeModel, TrainConfig, predict_proba, train
from .core import (
    ClassDistribution,
    FeaturePool,
    LabelLedger,
    LabelSource,
    RoundRecord,
    class_counts,
    l2_normalize,
)
from .errors import (
    AlsimError,
    BudgetError,
    ConfigError,
    InfeasibleInitError,
    InvalidInputError,
)
from .retrieval import RetrievedSet, apply_capped_filter, drop_multiclass
from .strategies import (
    SelectionRequest,
    score_pool,
    select_badge,
    select_coreset,
    select_entropy,
    select_random,
    select_tfs,
    wrap_pcb,
)

STRATEGIES = ("random", "entropy", "coreset", "badge", "pcb", "tfs")
ADAPTATIONS = ("linear_probe", "prototype_ct")

# seed-derivation stream tags, so init/selection/training randomness never collide
_STREAM_INIT = 0
_STREAM_SELECT = 1
_STREAM_TRAIN = 2


def derive_seed(seed: int, stream: int, round_index: int) -> int:
    """Stable 64-bit child seed for one (run seed, purpose, round)."""
    ss = np.random.SeedSequence([int(seed), stream, round_index])
    return int(ss.generate_state(1, np.uint64)[0])


class Oracle:
    """Immutable ground-truth labeler over a fixed id set."""

    def __init__(self, answers: dict):
        self._answers = {int(i): int(c) for i, c in answers.items()}

    @classmethod
    def from_pool(cls, pool: FeaturePool) -> "Oracle":
        if pool.labels is None:
            raise InvalidInputError("oracle needs a pool with ground-truth labels")
        return cls(dict(zip(pool.ids.tolist(), pool.labels.tolist())))

    def label(self, example_id) -> int:
        try:
            return self._answers[int(example_id)]
        except KeyError:
            raise InvalidInputError(f"oracle has no answer for id {example_id}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    rounds: int = 6
    budget_per_round: int | None = None  # None: one budget slot per class
    strategy: str = "random"
    adaptation: str = "linear_probe"
    rda_enabled: bool = False
    cap_mode: str = "count"  # count | ratio | none
    cap: int = 500
    cap_ratio: float = 0.5
    cap_top_x: int | None = None  # None: all classes
    train: TrainConfig = field(default_factory=TrainConfig)
    seeds: tuple = (0,)
    warm_start: bool = True
    include_retrieved_in_counts: bool = True
    tfs_count_update: str = "oracle"
    allow_tfs_without_rda: bool = False
    drop_multiclass_retrieved: bool = False
    pcb_fraction: float = 0.10
    prototype_init: str = "class_means"  # class_means | supplied
    retrieved_weight: float = 1.0
    record_timing: bool = False

    def __post_init__(self):
        if self.rounds < 0:
            raise ConfigError("rounds must be >= 0")
        if self.budget_per_round is not None and self.budget_per_round < 1:
            raise ConfigError("budget_per_round must be >= 1")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; pick one of {STRATEGIES}")
        if self.adaptation not in ADAPTATIONS:
            raise ConfigError(
                f"unknown adaptation {self.adaptation!r}; pick one of {ADAPTATIONS}"
            )
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if any(int(s) < 0 for s in self.seeds):
            raise ConfigError("seeds must be non-negative")
        if self.prototype_init not in ("class_means", "supplied"):
            raise ConfigError("prototype_init must be class_means or supplied")
        if self.strategy == "tfs" and not self.rda_enabled and not self.allow_tfs_without_rda:
            raise ConfigError(
                "tfs is not applicable without rda (class counts come from retrieved "
                "data); pass allow_tfs_without_rda to run it on oracle counts only"
            )
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))


@dataclass(frozen=True)
class TaskData:
    """Everything one experiment consumes.

    train/test pools carry ground-truth labels; the retrieved pool is
    optional and comes with per-class id assignments (an id may appear
    under several classes) plus class prototypes for similarity capping.
    """

    train: FeaturePool
    test: FeaturePool
    retrieved_features: FeaturePool | None = None
    retrieved_set: RetrievedSet | None = None
    prototypes: np.ndarray | None = None

    @classmethod
    def from_synth(cls, task) -> "TaskData":
        rset = RetrievedSet(
            [
                task.retrieved.ids[task.retrieved.labels == k]
                for k in range(task.retrieved.num_classes)
            ]
        )
        return cls(
            train=task.train,
            test=task.test,
            retrieved_features=task.retrieved,
            retrieved_set=rset,
            prototypes=task.prototypes,
        )


def init_round0(pool: FeaturePool, oracle: Oracle, num_classes: int, seed: int) -> LabelLedger:
    """One oracle-labeled example per class, chosen uniformly per class."""
    by_class: list[list[int]] = [[] for _ in range(num_classes)]
    for i in np.sort(pool.ids):
        by_class[oracle.label(i)].append(int(i))
    rng = np.random.default_rng(seed)
    ledger = LabelLedger()
    for k in range(num_classes):
        if not by_class[k]:
            raise InfeasibleInitError(f"class {k} has no pool examples to initialize from")
        ledger = ledger.with_oracle_label(int(rng.choice(by_class[k])), k, 0)
    return ledger


def evaluate(model, test: FeaturePool):
    """(accuracy, macro_f1, per_class_accuracy) on a labeled test pool.

    Per-class accuracy is recall; macro-F1 averages F1 over classes
    present in the test set, scoring 0 where precision + recall is 0.
    """
    if len(test) == 0:
        raise InvalidInputError("cannot evaluate on an empty test set")
    if test.labels is None:
        raise InvalidInputError("test pool has no ground-truth labels")
    num_classes = test.num_classes
    pred = np.argmax(predict_proba(model, test.features), axis=1)
    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(confusion, (test.labels, pred), 1)

    support = confusion.sum(axis=1)
    predicted = confusion.sum(axis=0)
    diag = np.diag(confusion)
    per_class_acc = np.where(support > 0, diag / np.maximum(support, 1), 0.0)
    accuracy = float(diag.sum() / len(test))

    f1_values = []
    for k in range(num_classes):
        if support[k] == 0:
            continue
        precision = diag[k] / predicted[k] if predicted[k] > 0 else 0.0
        recall = per_class_acc[k]
        f1_values.append(
            2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        )
    macro_f1 = float(np.mean(f1_values))
    return accuracy, macro_f1, per_class_acc


class _RetrievedTraining:
    """Retrieved (class, id) pairs remapped to fresh ledger ids.

    Fresh ids keep the ledger one-entry-per-id even when a corpus image
    matched several classes, and cannot collide with task pool ids.
    """

    def __init__(self, pairs, retrieved_pool: FeaturePool, first_fresh_id: int):
        self.fresh_ids = np.arange(
            first_fresh_id, first_fresh_id + len(pairs), dtype=np.int64
        )
        self.classes = np.array([k for k, _ in pairs], dtype=np.int64)
        source_ids = [i for _, i in pairs]
        self.features = retrieved_pool.features_for(source_ids)


def _initial_model(cfg: ExperimentConfig, data: TaskData, feats, labels, num_classes, dim):
    if cfg.adaptation == "linear_probe":
        return LinearProbe.zeros(num_classes, dim)
    if cfg.prototype_init == "supplied":
        if data.prototypes is None:
            raise ConfigError("prototype_init=supplied requires a prototype matrix")
        return PrototypeModel(l2_normalize(np.asarray(data.prototypes, dtype=np.float64)))
    return PrototypeModel.from_class_means(feats, labels, num_classes)


def run_experiment(cfg: ExperimentConfig, data: TaskData, seed: int | None = None):
    """Execute rounds 0..R for one seed; returns R+1 RoundRecords."""
    run_seed = int(cfg.seeds[0] if seed is None else seed)
    train_pool = _normalized(data.train)
    test_pool = _normalized(data.test)
    num_classes = train_pool.num_classes
    dim = train_pool.dim
    budget = cfg.budget_per_round or num_classes
    oracle = Oracle.from_pool(train_pool)

    retrieved = None
    if cfg.rda_enabled:
        if data.retrieved_features is None or data.retrieved_set is None:
            raise ConfigError("rda requires retrieved features and per-class assignments")
        if data.prototypes is None:
            raise ConfigError("rda similarity capping requires class prototypes")
        retrieved_pool = _normalized(data.retrieved_features)
        rset = data.retrieved_set
        if cfg.drop_multiclass_retrieved:
            rset = drop_multiclass(rset)
        capped = apply_capped_filter(
            rset,
            retrieved_pool,
            l2_normalize(np.asarray(data.prototypes, dtype=np.float64)),
            mode=cfg.cap_mode,
            cap=cfg.cap,
            ratio=cfg.cap_ratio,
            top_x=cfg.cap_top_x or num_classes,
        )
        first_fresh = int(max(train_pool.ids.max(), test_pool.ids.max(),
                              retrieved_pool.ids.max(initial=0))) + 1
        retrieved = _RetrievedTraining(list(capped.pairs()), retrieved_pool, first_fresh)

    records = []
    started = time.perf_counter()

    # round 0: init, optional retrieved merge, adapt, evaluate
    ledger = init_round0(train_pool, oracle, num_classes, derive_seed(run_seed, _STREAM_INIT, 0))
    init_ids = sorted(ledger.status.keys())
    if retrieved is not None:
        for fresh, cls in zip(retrieved.fresh_ids, retrieved.classes):
            ledger = ledger.with_retrieved(int(fresh), int(cls), 0)

    def training_arrays(current_ledger):
        oracle_ids = current_ledger.ids_by_source(LabelSource.ORACLE)
        feats = [train_pool.features_for(oracle_ids)]
        labels = [np.array([current_ledger.status[i][1] for i in oracle_ids], dtype=np.int64)]
        weights = [np.ones(len(oracle_ids))]
        if retrieved is not None and len(retrieved.fresh_ids):
            feats.append(retrieved.features)
            labels.append(retrieved.classes)
            weights.append(np.full(len(retrieved.fresh_ids), cfg.retrieved_weight))
        feats = np.vstack(feats)
        labels = np.concatenate(labels)
        weights = np.concatenate(weights)
        return feats, labels, (None if np.all(weights == 1.0) else weights)

    def adapt(model, current_ledger, round_index):
        feats, labels, weights = training_arrays(current_ledger)
        if model is None:  # cold start or round 0
            model = _initial_model(cfg, data, feats, labels, num_classes, dim)
        round_cfg = replace(cfg.train, seed=derive_seed(run_seed, _STREAM_TRAIN, round_index))
        return train(model, feats, labels, round_cfg, sample_weight=weights)

    model = adapt(None, ledger, 0)
    accuracy, macro_f1, per_class = evaluate(model, test_pool)
    records.append(
        RoundRecord(
            round=0,
            selected_ids=[int(i) for i in init_ids],
            accuracy=accuracy,
            macro_f1=macro_f1,
            per_class_accuracy=per_class,
            labeled_count=len(ledger),
            seed=run_seed,
            wall_ms=_elapsed_ms(started, cfg.record_timing),
        )
    )

    unlabeled = np.setdiff1d(train_pool.ids, np.array(init_ids, dtype=np.int64))

    for round_index in range(1, cfg.rounds + 1):
        try:
            started = time.perf_counter()
            if budget > len(unlabeled):
                raise BudgetError(
                    f"unlabeled pool of {len(unlabeled)} cannot cover budget {budget}"
                )
            subpool = FeaturePool(
                unlabeled, train_pool.features_for(unlabeled), None, num_classes
            )
            scores = score_pool(model, subpool)
            counts = class_counts(ledger, cfg.include_retrieved_in_counts, num_classes)
            req = SelectionRequest(
                budget, derive_seed(run_seed, _STREAM_SELECT, round_index), counts, unlabeled
            )
            selected = _dispatch(cfg, train_pool, ledger, scores, req, oracle)
            for example_id in selected:
                ledger = ledger.with_oracle_label(
                    int(example_id), oracle.label(example_id), round_index
                )
            unlabeled = np.setdiff1d(unlabeled, selected)
            model = adapt(model if cfg.warm_start else None, ledger, round_index)
            accuracy, macro_f1, per_class = evaluate(model, test_pool)
        except AlsimError as exc:
            raise type(exc)(f"round {round_index}: {exc}") from exc
        records.append(
            RoundRecord(
                round=round_index,
                selected_ids=[int(i) for i in selected],
                accuracy=accuracy,
                macro_f1=macro_f1,
                per_class_accuracy=per_class,
                labeled_count=len(ledger),
                seed=run_seed,
                wall_ms=_elapsed_ms(started, cfg.record_timing),
            )
        )
    return records


def run_all(cfg: ExperimentConfig, data: TaskData):
    """run_experiment for every configured seed, in seed order."""
    return [(s, run_experiment(cfg, data, seed=s)) for s in cfg.seeds]


def _dispatch(cfg, train_pool, ledger, scores, req, oracle):
    if cfg.strategy == "random":
        return select_random(scores, req)
    if cfg.strategy == "entropy":
        return select_entropy(scores, req)
    if cfg.strategy == "coreset":
        return select_coreset(train_pool, ledger.ids_by_source(LabelSource.ORACLE), req)
    if cfg.strategy == "badge":
        return select_badge(train_pool, scores, req)
    if cfg.strategy == "pcb":
        base = lambda r: select_badge(train_pool, scores, r)
        return wrap_pcb(base, scores, req, cfg.pcb_fraction)
    if cfg.strategy == "tfs":
        return select_tfs(scores, req, cfg.tfs_count_update, oracle.label)
    raise ConfigError(f"unknown strategy {cfg.strategy!r}")


def _normalized(pool: FeaturePool) -> FeaturePool:
    return FeaturePool(pool.ids, l2_normalize(pool.features), pool.labels, pool.num_classes)


def _elapsed_ms(started: float, record_timing: bool) -> float:
    return (time.perf_counter() - started) * 1e3 if record_timing else 0.0
