"""Retrieval-based data augmentation over a caption corpus.

Pipeline: whole-word string matching of class-name synonyms against
captions, then similarity-ranked truncation against class prototypes,
with per-class caps computed by count or by ratio. Matching is
token-bounded (never raw substring), so "cat" does not match inside
"concatenate".
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import FeaturePool
from .errors import DataInconsistencyError, InvalidInputError

_NON_WORD = re.compile(r"[\W_]+", re.UNICODE)


def normalize_text(text: str) -> str:
    """Lowercase, map punctuation to spaces, collapse whitespace."""
    return _NON_WORD.sub(" ", text.lower()).strip()


@dataclass(frozen=True)
class CaptionCorpus:
    """Sequence of (id, caption) pairs with unique ids."""

    ids: np.ndarray
    captions: list

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        if len(np.unique(ids)) != len(ids):
            raise InvalidInputError("corpus ids must be unique")
        if len(ids) != len(self.captions):
            raise InvalidInputError("ids and captions must have equal length")
        for i, cap in zip(ids, self.captions):
            if not normalize_text(cap):
                raise InvalidInputError(f"caption for id {i} is empty after normalization")
        ids.setflags(write=False)
        object.__setattr__(self, "ids", ids)

    def __len__(self):
        return len(self.ids)


class SynonymTable:
    """Per-class synonym lists, stored normalized (lowercase, single-spaced)."""

    def __init__(self, class_names, synonyms_per_class):
        if len(class_names) != len(synonyms_per_class):
            raise InvalidInputError("one synonym list required per class")
        if len(set(class_names)) != len(class_names):
            raise InvalidInputError("class names must be unique")
        self.class_names = list(class_names)
        self.synonyms = []
        for k, names in enumerate(synonyms_per_class):
            if not names:
                raise InvalidInputError(f"class {k} has no synonyms")
            normalized = []
            for name in names:
                norm = normalize_text(name)
                if not norm:
                    raise InvalidInputError(f"class {k} synonym {name!r} normalizes to empty")
                normalized.append(norm)
            self.synonyms.append(normalized)

    @property
    def num_classes(self) -> int:
        return len(self.synonyms)


@dataclass(frozen=True)
class RetrievedSet:
    """Per-class lists of matched corpus ids, each sorted ascending.

    An id may appear under several classes (one caption can mention
    several class names).
    """

    by_class: list  # list of int64 arrays

    def __post_init__(self):
        cleaned = []
        for ids in self.by_class:
            arr = np.asarray(ids, dtype=np.int64)
            if np.any(np.diff(arr) <= 0):
                raise InvalidInputError("per-class id lists must be strictly increasing")
            arr.setflags(write=False)
            cleaned.append(arr)
        object.__setattr__(self, "by_class", cleaned)

    @property
    def num_classes(self) -> int:
        return len(self.by_class)

    def counts(self) -> np.ndarray:
        return np.array([len(ids) for ids in self.by_class], dtype=np.int64)

    def pairs(self):
        """All (class, id) pairs in (class asc, id asc) order."""
        for k, ids in enumerate(self.by_class):
            for i in ids:
                yield k, int(i)


def match_captions(corpus: CaptionCorpus, names: SynonymTable) -> RetrievedSet:
    """Assign corpus ids to every class whose synonym occurs in the caption.

    A synonym matches iff its token sequence appears contiguously in the
    normalized caption (case-insensitive, word-bounded). Output id lists
    are sorted ascending, independent of corpus scan order.
    """
    # Encode captions and patterns over the synonym-token vocabulary; corpus
    # tokens outside it can never match and map to -1.
    vocab: dict[str, int] = {}
    pattern_tokens: list[int] = []
    pattern_offsets = [0]
    pattern_class: list[int] = []
    for k, syns in enumerate(names.synonyms):
        for syn in syns:
            for tok in syn.split(" "):
                if tok not in vocab:
                    vocab[tok] = len(vocab)
                pattern_tokens.append(vocab[tok])
            pattern_offsets.append(len(pattern_tokens))
            pattern_class.append(k)

    caption_tokens: list[int] = []
    caption_offsets = [0]
    for cap in corpus.captions:
        for tok in normalize_text(cap).split(" "):
            caption_tokens.append(vocab.get(tok, -1))
        caption_offsets.append(len(caption_tokens))

    n_patterns = len(pattern_class)
    first = [pattern_tokens[pattern_offsets[p]] for p in range(n_patterns)]
    order = np.argsort(np.array(first, dtype=np.int64), kind="stable")
    patterns_by_first = np.asarray(order, dtype=np.int32)
    first_offsets = np.zeros(len(vocab) + 1, dtype=np.int64)
    np.add.at(first_offsets, np.array(first, dtype=np.int64) + 1, 1)
    first_offsets = np.cumsum(first_offsets)

    cap_idx, pat_idx = _kernels.match_token_patterns(
        np.array(caption_tokens, dtype=np.int32),
        np.array(caption_offsets, dtype=np.int64),
        np.array(pattern_tokens, dtype=np.int32),
        np.array(pattern_offsets, dtype=np.int64),
        patterns_by_first,
        first_offsets,
    )

    hits: list[set] = [set() for _ in range(names.num_classes)]
    for c, p in zip(cap_idx, pat_idx):
        hits[pattern_class[p]].add(int(corpus.ids[c]))
    return RetrievedSet([np.array(sorted(h), dtype=np.int64) for h in hits])


def drop_multiclass(retrieved: RetrievedSet) -> RetrievedSet:
    """Remove ids that matched more than one class.

    By default an image matched by several class names trains under each
    of them; this is the opt-in alternative that discards such images.
    """
    seen: dict[int, int] = {}
    for _, example_id in retrieved.pairs():
        seen[example_id] = seen.get(example_id, 0) + 1
    return RetrievedSet(
        [ids[[seen[int(i)] == 1 for i in ids]] for ids in retrieved.by_class]
    )


def similarity_filter(
    retrieved: RetrievedSet,
    features: FeaturePool,
    prototypes: np.ndarray,
    per_class_cap,
) -> RetrievedSet:
    """Keep only the `cap` ids most cosine-similar to each class prototype.

    `per_class_cap` is a single int or one cap per class. Features and
    prototypes are expected L2-normalized (cosine = dot). Ties in
    similarity break toward the lower id; output lists are re-sorted by
    id per the RetrievedSet invariant.
    """
    prototypes = np.asarray(prototypes, dtype=np.float64)
    if prototypes.shape != (retrieved.num_classes, features.dim):
        raise InvalidInputError(
            f"prototypes shape {prototypes.shape} does not match "
            f"({retrieved.num_classes}, {features.dim})"
        )
    caps = np.broadcast_to(
        np.asarray(per_class_cap, dtype=np.int64), (retrieved.num_classes,)
    )
    if caps.min(initial=0) < 0:
        raise InvalidInputError("per-class cap must be >= 0")

    kept = []
    for k, ids in enumerate(retrieved.by_class):
        cap = int(caps[k])
        if cap == 0 or len(ids) == 0:
            kept.append(np.empty(0, dtype=np.int64))
            continue
        if cap >= len(ids):
            kept.append(ids.copy())
            continue
        try:
            feats = features.features_for(ids)
        except InvalidInputError as exc:
            raise DataInconsistencyError(
                f"class {k}: retrieved id missing from feature pool ({exc})"
            ) from None
        sims = feats @ prototypes[k]
        order = np.lexsort((ids, -sims))  # descending similarity, then ascending id
        kept.append(np.sort(ids[order[:cap]]))
    return RetrievedSet(kept)


def cap_by_count(counts, cap: int, top_x: int) -> np.ndarray:
    """Clamp the top_x most-populated classes to at most `cap` each.

    Ties at the top_x boundary go to the lower class index. Other
    classes pass through untouched.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if cap < 0:
        raise InvalidInputError("cap must be >= 0")
    _check_top_x(top_x, len(counts))
    out = counts.copy()
    dominant = np.lexsort((np.arange(len(counts)), -counts))[:top_x]
    out[dominant] = np.minimum(out[dominant], cap)
    return out


def cap_by_ratio(counts, ratio: float, top_x: int) -> np.ndarray:
    """Scale the top_x most-populated classes down to floor(ratio * count)."""
    counts = np.asarray(counts, dtype=np.int64)
    if not 0.0 < ratio <= 1.0:
        raise InvalidInputError("ratio must lie in (0, 1]")
    _check_top_x(top_x, len(counts))
    out = counts.copy()
    dominant = np.lexsort((np.arange(len(counts)), -counts))[:top_x]
    out[dominant] = np.floor(ratio * counts[dominant]).astype(np.int64)
    return out


def _check_top_x(top_x: int, num_classes: int) -> None:
    if not 1 <= top_x <= num_classes:
        raise InvalidInputError(f"top_x must lie in [1, {num_classes}], got {top_x}")


def apply_capped_filter(
    retrieved: RetrievedSet,
    features: FeaturePool,
    prototypes: np.ndarray,
    mode: str = "count",
    cap: int = 500,
    ratio: float = 0.5,
    top_x: int | None = None,
) -> RetrievedSet:
    """match -> cap pipeline: compute per-class targets, then drop the
    least prototype-similar ids down to each target.

    mode "count" clamps the top_x dominant classes to `cap` (the default,
    cap=500 on all classes); mode "ratio" retains floor(ratio * count);
    mode "none" passes through.
    """
    if mode == "none":
        return retrieved
    counts = retrieved.counts()
    if top_x is None:
        top_x = len(counts)
    if mode == "count":
        targets = cap_by_count(counts, cap, top_x)
    elif mode == "ratio":
        targets = cap_by_ratio(counts, ratio, top_x)
    else:
        raise InvalidInputError(f"unknown capping mode {mode!r}")
    return similarity_filter(retrieved, features, prototypes, targets)
