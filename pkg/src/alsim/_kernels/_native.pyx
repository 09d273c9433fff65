# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the fallback kernels; see fallback.py for contracts."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "native"


def kcenter_greedy(features, center_rows, candidate_rows, budget):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] X = np.ascontiguousarray(features, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] centers = np.ascontiguousarray(center_rows, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cand = np.ascontiguousarray(candidate_rows, dtype=np.int64)
    cdef Py_ssize_t m = cand.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t n_budget = budget
    cdef cnp.ndarray[cnp.float64_t, ndim=1] min_d2 = np.full(m, np.inf)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] picked = np.empty(n_budget, dtype=np.int64)
    cdef Py_ssize_t i, j, k, t, c, best
    cdef double d2, diff, best_val

    for c in range(centers.shape[0]):
        for i in range(m):
            d2 = 0.0
            for k in range(d):
                diff = X[cand[i], k] - X[centers[c], k]
                d2 += diff * diff
            if d2 < min_d2[i]:
                min_d2[i] = d2

    for t in range(n_budget):
        best = 0
        best_val = min_d2[0]
        for i in range(1, m):
            if min_d2[i] > best_val:
                best_val = min_d2[i]
                best = i
        picked[t] = cand[best]
        min_d2[best] = -1.0
        for i in range(m):
            if min_d2[i] < 0.0:
                continue
            d2 = 0.0
            for k in range(d):
                diff = X[cand[i], k] - X[cand[best], k]
                d2 += diff * diff
            if d2 < min_d2[i]:
                min_d2[i] = d2
    return picked


def kmeanspp_select(embeddings, budget, uniforms):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] E = np.ascontiguousarray(embeddings, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef Py_ssize_t m = E.shape[0]
    cdef Py_ssize_t q = E.shape[1]
    cdef Py_ssize_t n_budget = budget
    cdef cnp.ndarray[cnp.int64_t, ndim=1] picked = np.empty(n_budget, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] min_d2 = np.zeros(m)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] chosen = np.zeros(m, dtype=np.uint8)
    cdef Py_ssize_t i, k, t, j, first, seen
    cdef double d2, diff, total, target, cum

    first = <Py_ssize_t>(u[0] * m)
    if first > m - 1:
        first = m - 1
    picked[0] = first
    chosen[first] = 1
    for i in range(m):
        d2 = 0.0
        for k in range(q):
            diff = E[i, k] - E[first, k]
            d2 += diff * diff
        min_d2[i] = d2
    min_d2[first] = 0.0

    for t in range(1, n_budget):
        total = 0.0
        for i in range(m):
            total += min_d2[i]
        if total <= 0.0:
            # all remaining weights zero: uniform pick among unchosen rows
            seen = <Py_ssize_t>(u[t] * (m - t))
            if seen > m - t - 1:
                seen = m - t - 1
            j = -1
            for i in range(m):
                if chosen[i] == 0:
                    if seen == 0:
                        j = i
                        break
                    seen -= 1
        else:
            target = u[t] * total
            cum = 0.0
            j = -1
            for i in range(m):
                cum += min_d2[i]
                if cum > target:
                    j = i
                    break
            if j < 0 or min_d2[j] == 0.0:
                for i in range(m - 1, -1, -1):
                    if min_d2[i] > 0.0:
                        j = i
                        break
        picked[t] = j
        chosen[j] = 1
        for i in range(m):
            if chosen[i] == 1:
                min_d2[i] = 0.0
                continue
            d2 = 0.0
            for k in range(q):
                diff = E[i, k] - E[j, k]
                d2 += diff * diff
            if d2 < min_d2[i]:
                min_d2[i] = d2
    return picked


def match_token_patterns(
    caption_tokens,
    caption_offsets,
    pattern_tokens,
    pattern_offsets,
    patterns_by_first,
    first_offsets,
):
    cdef cnp.ndarray[cnp.int32_t, ndim=1] ctok = np.ascontiguousarray(caption_tokens, dtype=np.int32)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] coff = np.ascontiguousarray(caption_offsets, dtype=np.int64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] ptok = np.ascontiguousarray(pattern_tokens, dtype=np.int32)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] poff = np.ascontiguousarray(pattern_offsets, dtype=np.int64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] by_first = np.ascontiguousarray(patterns_by_first, dtype=np.int32)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] foff = np.ascontiguousarray(first_offsets, dtype=np.int64)

    cdef Py_ssize_t n_captions = coff.shape[0] - 1
    cdef Py_ssize_t n_patterns = poff.shape[0] - 1
    cdef cnp.ndarray[cnp.int64_t, ndim=1] last_hit = np.full(n_patterns, -1, dtype=np.int64)
    cdef list out_c = []
    cdef list out_p = []
    cdef Py_ssize_t c, pos, slot, k, start, end, p_start, p_end, length
    cdef cnp.int32_t tok, pat
    cdef bint match

    for c in range(n_captions):
        start = coff[c]
        end = coff[c + 1]
        for pos in range(start, end):
            tok = ctok[pos]
            if tok < 0:
                continue
            for slot in range(foff[tok], foff[tok + 1]):
                pat = by_first[slot]
                if last_hit[pat] == c:
                    continue
                p_start = poff[pat]
                p_end = poff[pat + 1]
                length = p_end - p_start
                if pos + length > end:
                    continue
                match = True
                for k in range(1, length):
                    if ctok[pos + k] != ptok[p_start + k]:
                        match = False
                        break
                if match:
                    last_hit[pat] = c
                    out_c.append(c)
                    out_p.append(pat)
    return (
        np.array(out_c, dtype=np.int64),
        np.array(out_p, dtype=np.int64),
    )
