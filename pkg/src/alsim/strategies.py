"""Unlabeled-data selection strategies.

Implements random, max-entropy, k-center-greedy coreset, BADGE
(k-means++ seeding over loss-gradient embeddings), a pseudo-class-balance
wrapper, and tail-first sampling (rarest labeled class first, highest
predictive entropy within it).

Every strategy is a deterministic function of its inputs and the request
seed, returns exactly `budget` distinct ids drawn from the candidate
set, and breaks ties toward the lower id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .adapt import predict_proba
from .core import ClassDistribution, FeaturePool
from .errors import BudgetError, DataInconsistencyError, InvalidInputError


@dataclass(frozen=True)
class PoolScores:
    """Per-example model outputs: class distribution, entropy (nats),
    and pseudo-label (argmax class, ties to the lowest index)."""

    ids: np.ndarray
    proba: np.ndarray
    entropy: np.ndarray
    pseudo_label: np.ndarray

    @classmethod
    def from_proba(cls, ids, proba) -> "PoolScores":
        ids = np.asarray(ids, dtype=np.int64)
        proba = np.asarray(proba, dtype=np.float64)
        if proba.ndim != 2 or proba.shape[0] != len(ids):
            raise InvalidInputError("proba must be an n x K matrix matching ids")
        return cls(ids, proba, entropy_nats(proba), np.argmax(proba, axis=1).astype(np.int64))

    @property
    def num_classes(self) -> int:
        return self.proba.shape[1]

    def rows_for(self, ids) -> np.ndarray:
        lookup = {int(i): r for r, i in enumerate(self.ids)}
        try:
            return np.array([lookup[int(i)] for i in ids], dtype=np.int64)
        except KeyError as exc:
            raise DataInconsistencyError(f"no scores for id {exc.args[0]}") from None


def entropy_nats(proba: np.ndarray) -> np.ndarray:
    """Shannon entropy per row in nats, with 0 ln 0 taken as 0."""
    safe = np.where(proba > 0.0, proba, 1.0)
    return -np.sum(np.where(proba > 0.0, proba * np.log(safe), 0.0), axis=1)


@dataclass(frozen=True)
class SelectionRequest:
    """Budget, seed, labeled-class counts, and eligible candidate ids."""

    budget: int
    rng_seed: int
    labeled_counts: ClassDistribution
    candidate_ids: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.candidate_ids, dtype=np.int64)
        if len(np.unique(ids)) != len(ids):
            raise InvalidInputError("candidate ids must be unique")
        if self.budget < 1:
            raise BudgetError(f"budget must be >= 1, got {self.budget}")
        if self.budget > len(ids):
            raise BudgetError(
                f"budget {self.budget} exceeds candidate pool of {len(ids)}"
            )
        ids.setflags(write=False)
        object.__setattr__(self, "candidate_ids", ids)

    def sorted_candidates(self) -> np.ndarray:
        return np.sort(self.candidate_ids)


def score_pool(model, pool: FeaturePool) -> PoolScores:
    """Predict class distributions for every pool example."""
    if len(pool) == 0:
        raise InvalidInputError("cannot score an empty pool")
    return PoolScores.from_proba(pool.ids, predict_proba(model, pool.features))


def select_entropy(scores: PoolScores, req: SelectionRequest) -> np.ndarray:
    """The budget candidates with the highest predictive entropy."""
    cand = req.sorted_candidates()
    ent = scores.entropy[scores.rows_for(cand)]
    order = np.lexsort((cand, -ent))
    return cand[order[: req.budget]]


def select_random(scores: PoolScores, req: SelectionRequest) -> np.ndarray:
    """Uniform sample without replacement, deterministic per seed."""
    rng = np.random.default_rng(req.rng_seed)
    return rng.choice(req.sorted_candidates(), size=req.budget, replace=False)


def select_coreset(pool: FeaturePool, labeled_ids, req: SelectionRequest) -> np.ndarray:
    """k-center greedy: repeatedly take the candidate farthest (Euclidean)
    from its nearest center, centers being the labeled examples plus all
    prior picks. Callers supply unit-normalized features; the experiment
    harness does."""
    labeled_ids = np.asarray(labeled_ids, dtype=np.int64)
    if len(labeled_ids) == 0:
        raise InvalidInputError("coreset needs at least one labeled center")
    cand = req.sorted_candidates()
    picked_rows = _kernels.kcenter_greedy(
        pool.features, pool.rows_for(labeled_ids), pool.rows_for(cand), req.budget
    )
    return pool.ids[picked_rows]


def gradient_embeddings(features: np.ndarray, proba: np.ndarray) -> np.ndarray:
    """BADGE embedding g_i = (p_i - onehot(argmax p_i)) outer x_i, flattened."""
    n, num_classes = proba.shape
    delta = proba.copy()
    delta[np.arange(n), np.argmax(proba, axis=1)] -= 1.0
    return (delta[:, :, None] * features[:, None, :]).reshape(n, num_classes * features.shape[1])


def select_badge(pool: FeaturePool, scores: PoolScores, req: SelectionRequest) -> np.ndarray:
    """k-means++ seeding over loss-gradient embeddings; the first pick is
    uniform, later picks are drawn proportional to squared distance from
    the nearest prior pick (uniform fallback when all distances are 0)."""
    cand = req.sorted_candidates()
    rows = scores.rows_for(cand)
    emb = gradient_embeddings(pool.features_for(cand), scores.proba[rows])
    uniforms = np.random.default_rng(req.rng_seed).random(req.budget)
    picked = _kernels.kmeanspp_select(emb, req.budget, uniforms)
    return cand[picked]


def wrap_pcb(base, scores: PoolScores, req: SelectionRequest, candidate_fraction: float = 0.10) -> np.ndarray:
    """Pseudo-class-balance wrapper.

    `base` prefilters the pool to its top ceil(fraction * n) picks (pass
    None to balance over the whole candidate set). Picks then go one at a
    time to the pseudo-label class with the lowest running count
    (labeled counts plus picks so far, ties to the lower class index),
    taking the highest-entropy candidate within that class and falling
    through to the next-lowest-count class when one is exhausted.
    """
    if not 0.0 < candidate_fraction <= 1.0:
        raise InvalidInputError("candidate_fraction must lie in (0, 1]")
    pool_size = math.ceil(candidate_fraction * len(req.candidate_ids))
    if pool_size < req.budget:
        raise BudgetError(
            f"PCB candidate pool of {pool_size} cannot cover budget {req.budget}"
        )
    if base is None:
        cand = req.sorted_candidates()
    else:
        cand = np.asarray(
            base(SelectionRequest(pool_size, req.rng_seed, req.labeled_counts, req.candidate_ids)),
            dtype=np.int64,
        )
    return _balance_greedy(scores, req, cand, count_update="pseudo", oracle=None)


def select_tfs(scores: PoolScores, req: SelectionRequest, count_update: str = "oracle", oracle=None) -> np.ndarray:
    """Tail-first sampling.

    Each of the budget picks targets the currently rarest labeled class:
    among remaining candidates pseudo-labeled as that class, take the
    one with the highest entropy (ties to the lower id); when that class
    has no candidates, advance to the next-rarest (ascending count, then
    class index). Counts update per pick: "oracle" queries the oracle
    immediately and counts the true class, "pseudo" counts the
    pseudo-label.
    """
    if count_update not in ("oracle", "pseudo"):
        raise InvalidInputError(f"unknown count_update mode {count_update!r}")
    if count_update == "oracle" and oracle is None:
        raise InvalidInputError("oracle count updates require an oracle callable")
    return _balance_greedy(scores, req, req.sorted_candidates(), count_update, oracle)


def _balance_greedy(scores, req, candidate_ids, count_update, oracle):
    """Shared rarest-class-first greedy used by TFS and the PCB wrapper."""
    counts = req.labeled_counts.counts.astype(np.int64).copy()
    num_classes = len(counts)
    if scores.num_classes != num_classes:
        raise InvalidInputError(
            f"scores have {scores.num_classes} classes, counts have {num_classes}"
        )
    rows = scores.rows_for(candidate_ids)
    pseudo = scores.pseudo_label[rows]
    ent = scores.entropy[rows]

    # per-class queues ordered best-first: highest entropy, then lowest id
    queues: list[list[int]] = [[] for _ in range(num_classes)]
    for k in range(num_classes):
        members = np.flatnonzero(pseudo == k)
        order = np.lexsort((candidate_ids[members], -ent[members]))
        queues[k] = list(members[order])
    heads = [0] * num_classes

    picks = np.empty(req.budget, dtype=np.int64)
    for j in range(req.budget):
        by_rarity = np.lexsort((np.arange(num_classes), counts))
        chosen = -1
        for k in by_rarity:
            if heads[k] < len(queues[k]):
                chosen = int(k)
                break
        if chosen < 0:
            raise BudgetError(f"candidate pool exhausted after {j} of {req.budget} picks")
        member = queues[chosen][heads[chosen]]
        heads[chosen] += 1
        picks[j] = candidate_ids[member]
        if count_update == "oracle":
            counts[int(oracle(int(picks[j])))] += 1
        else:
            counts[chosen] += 1
    return picks
