"""Pure-Python/numpy implementations of the hot selection and matching loops.

Selected at import time when the compiled extension is unavailable or when
ALSIM_PURE_PYTHON is set. Every function here must stay behaviorally
identical to its twin in _native.pyx (same picks, same tie-breaking, same
random-number consumption); tests/test_kernels.py enforces this.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def kcenter_greedy(features, center_rows, candidate_rows, budget):
    """Farthest-point greedy selection.

    Picks `budget` rows out of `candidate_rows`, each time taking the
    candidate whose squared distance to the nearest already-chosen center
    (initial `center_rows` plus prior picks) is largest. Ties go to the
    candidate earliest in `candidate_rows` order.
    """
    features = np.ascontiguousarray(features, dtype=np.float64)
    candidate_rows = np.asarray(candidate_rows, dtype=np.int64)
    cand = features[candidate_rows]
    min_d2 = np.full(len(candidate_rows), np.inf)
    for row in np.asarray(center_rows, dtype=np.int64):
        diff = cand - features[row]
        np.minimum(min_d2, np.einsum("ij,ij->i", diff, diff), out=min_d2)

    picked = np.empty(budget, dtype=np.int64)
    for t in range(budget):
        j = int(np.argmax(min_d2))  # argmax returns the first max: lowest position wins ties
        picked[t] = candidate_rows[j]
        min_d2[j] = -1.0  # used marker; the minimum update below preserves it
        diff = cand - cand[j]
        np.minimum(min_d2, np.einsum("ij,ij->i", diff, diff), out=min_d2)
    return picked


def kmeanspp_select(embeddings, budget, uniforms):
    """k-means++ seeding over embedding rows.

    The first pick is uniform; each later pick is drawn with probability
    proportional to squared distance to the nearest prior pick, via
    inverse CDF on the pre-drawn `uniforms` (one per pick). When every
    remaining distance is zero the pick falls back to a uniform choice
    among the not-yet-chosen rows. Returns row indices in pick order.
    """
    emb = np.ascontiguousarray(embeddings, dtype=np.float64)
    m = emb.shape[0]
    uniforms = np.asarray(uniforms, dtype=np.float64)
    chosen = np.zeros(m, dtype=bool)
    picked = np.empty(budget, dtype=np.int64)

    first = min(int(uniforms[0] * m), m - 1)
    picked[0] = first
    chosen[first] = True
    diff = emb - emb[first]
    min_d2 = np.einsum("ij,ij->i", diff, diff)
    min_d2[first] = 0.0

    for t in range(1, budget):
        cum = np.cumsum(min_d2)
        total = cum[-1]
        if total <= 0.0:
            remaining = np.flatnonzero(~chosen)
            r = min(int(uniforms[t] * len(remaining)), len(remaining) - 1)
            j = int(remaining[r])
        else:
            target = uniforms[t] * total
            j = int(np.searchsorted(cum, target, side="right"))
            if j >= m or min_d2[j] == 0.0:
                # float overrun: take the last row with positive weight
                j = int(np.flatnonzero(min_d2 > 0.0)[-1])
        picked[t] = j
        chosen[j] = True
        diff = emb - emb[j]
        np.minimum(min_d2, np.einsum("ij,ij->i", diff, diff), out=min_d2)
        min_d2[chosen] = 0.0
    return picked


def match_token_patterns(
    caption_tokens,
    caption_offsets,
    pattern_tokens,
    pattern_offsets,
    patterns_by_first,
    first_offsets,
):
    """Multi-pattern contiguous token-sequence matching.

    Captions and patterns are flat int32 token-id arrays with offset
    tables (CSR layout); token id -1 marks out-of-vocabulary corpus
    tokens. `patterns_by_first`/`first_offsets` index pattern ids by
    their first token. Returns (caption_index, pattern_index) pairs,
    each pair at most once, ordered by caption then pattern discovery.
    """
    caption_tokens = np.asarray(caption_tokens, dtype=np.int32)
    caption_offsets = np.asarray(caption_offsets, dtype=np.int64)
    pattern_tokens = np.asarray(pattern_tokens, dtype=np.int32)
    pattern_offsets = np.asarray(pattern_offsets, dtype=np.int64)
    patterns_by_first = np.asarray(patterns_by_first, dtype=np.int32)
    first_offsets = np.asarray(first_offsets, dtype=np.int64)

    n_captions = len(caption_offsets) - 1
    n_patterns = len(pattern_offsets) - 1
    last_hit = np.full(n_patterns, -1, dtype=np.int64)
    out_captions: list[int] = []
    out_patterns: list[int] = []

    for c in range(n_captions):
        start, end = caption_offsets[c], caption_offsets[c + 1]
        for pos in range(start, end):
            tok = caption_tokens[pos]
            if tok < 0:
                continue
            for slot in range(first_offsets[tok], first_offsets[tok + 1]):
                pat = patterns_by_first[slot]
                if last_hit[pat] == c:
                    continue
                p_start, p_end = pattern_offsets[pat], pattern_offsets[pat + 1]
                length = p_end - p_start
                if pos + length > end:
                    continue
                match = True
                for k in range(1, length):
                    if caption_tokens[pos + k] != pattern_tokens[p_start + k]:
                        match = False
                        break
                if match:
                    last_hit[pat] = c
                    out_captions.append(c)
                    out_patterns.append(pat)
    return (
        np.array(out_captions, dtype=np.int64),
        np.array(out_patterns, dtype=np.int64),
    )
