#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Runs each hot kernel on pool/corpus-scale inputs with both backends,
checks they agree, and prints a timing table.

    python3 benchmarks/bench_kernels.py [--quick]
"""

import argparse
import time

import numpy as np

from alsim._kernels import fallback

try:
    from alsim._kernels import _native
except ImportError:
    _native = None


def timed(fn, *args, repeats=3):
    best = float("inf")
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, result


def bench_kcenter(rng, n, d, budget):
    feats = rng.normal(size=(n, d))
    centers = rng.choice(n, size=32, replace=False)
    cand = np.setdiff1d(np.arange(n), centers)
    return ("kcenter_greedy", f"n={n} d={d} N={budget}",
            (feats, centers, cand, budget))


def bench_kmeanspp(rng, n, q, budget):
    emb = rng.normal(size=(n, q))
    uniforms = rng.random(budget)
    return ("kmeanspp_select", f"n={n} q={q} N={budget}",
            (emb, budget, uniforms))


def bench_match(rng, n_captions, vocab, n_patterns):
    cap_tokens, cap_offsets = [], [0]
    for _ in range(n_captions):
        length = int(rng.integers(4, 16))
        cap_tokens.extend(int(t) for t in rng.integers(-1, vocab, size=length))
        cap_offsets.append(len(cap_tokens))
    pat_tokens, pat_offsets = [], [0]
    for _ in range(n_patterns):
        length = int(rng.integers(1, 3))
        pat_tokens.extend(int(t) for t in rng.integers(0, vocab, size=length))
        pat_offsets.append(len(pat_tokens))
    first = [pat_tokens[pat_offsets[p]] for p in range(n_patterns)]
    order = np.argsort(np.array(first), kind="stable").astype(np.int32)
    first_offsets = np.zeros(vocab + 1, dtype=np.int64)
    np.add.at(first_offsets, np.array(first) + 1, 1)
    first_offsets = np.cumsum(first_offsets)
    return (
        "match_token_patterns",
        f"captions={n_captions} patterns={n_patterns}",
        (
            np.array(cap_tokens, dtype=np.int32),
            np.array(cap_offsets, dtype=np.int64),
            np.array(pat_tokens, dtype=np.int32),
            np.array(pat_offsets, dtype=np.int64),
            order,
            first_offsets,
        ),
    )


def equal(a, b):
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="smaller instances")
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    scale = 0.2 if args.quick else 1.0

    cases = [
        bench_kcenter(rng, int(20_000 * scale), 64, int(200 * scale) or 8),
        bench_kmeanspp(rng, int(8_000 * scale), 128, int(200 * scale) or 8),
        bench_match(rng, int(200_000 * scale), 4_000, 400),
    ]

    if _native is None:
        print("compiled kernels unavailable; timing the fallback only")
    header = f"{'kernel':<22}{'instance':<34}{'python':>10}{'native':>10}{'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, label, call_args in cases:
        py_time, py_out = timed(getattr(fallback, name), *call_args)
        if _native is not None:
            nat_time, nat_out = timed(getattr(_native, name), *call_args)
            assert equal(py_out, nat_out), f"{name}: backends disagree"
            print(f"{name:<22}{label:<34}{py_time:>9.3f}s{nat_time:>9.3f}s"
                  f"{py_time / nat_time:>8.1f}x")
        else:
            print(f"{name:<22}{label:<34}{py_time:>9.3f}s{'-':>10}{'-':>9}")


if __name__ == "__main__":
    main()
