import itertools

import numpy as np
import pytest

from alsim.adapt import LinearProbe
from alsim.core import ClassDistribution, FeaturePool, l2_normalize
from alsim.errors import BudgetError, InvalidInputError
from alsim.strategies import (
    PoolScores,
    SelectionRequest,
    entropy_nats,
    gradient_embeddings,
    score_pool,
    select_badge,
    select_coreset,
    select_entropy,
    select_random,
    select_tfs,
    wrap_pcb,
)


def scores_of(ids, proba):
    return PoolScores.from_proba(np.asarray(ids), np.asarray(proba, dtype=np.float64))


def request(budget, candidates, counts, seed=0):
    return SelectionRequest(
        budget, seed, ClassDistribution(np.asarray(counts, dtype=np.int64)),
        np.asarray(candidates, dtype=np.int64),
    )


def simulate_tfs_inner_loop(counts, candidates, oracle, budget):
    """Independent step-by-step simulation of the tail-first inner loop.

    `candidates` is a list of (id, pseudo_label, entropy). Recomputes the
    rarest class from scratch each step and scans linearly; shares no
    code with the implementation under test.
    """
    counts = list(counts)
    remaining = list(candidates)
    picked = []
    for _ in range(budget):
        classes_by_rarity = sorted(range(len(counts)), key=lambda k: (counts[k], k))
        chosen = None
        for cls in classes_by_rarity:
            members = [c for c in remaining if c[1] == cls]
            if members:
                chosen = max(members, key=lambda c: (c[2], -c[0]))
                break
        if chosen is None:
            raise AssertionError("simulator ran out of candidates")
        picked.append(chosen[0])
        remaining.remove(chosen)
        counts[oracle(chosen[0])] += 1
    return picked


class TestPoolScores:
    def test_uniform_entropy_is_ln_k(self):
        scores = scores_of([1, 2], np.full((2, 3), 1 / 3))
        np.testing.assert_allclose(scores.entropy, np.log(3), atol=1e-12)

    def test_one_hot(self):
        scores = scores_of([1], [[1.0, 0.0, 0.0]])
        assert scores.entropy[0] == 0.0
        assert scores.pseudo_label[0] == 0

    def test_direct_evaluation(self):
        scores = scores_of([1], [[0.5, 0.25, 0.25]])
        import math
        expected = -(0.5 * math.log(0.5) + 2 * 0.25 * math.log(0.25))
        np.testing.assert_allclose(scores.entropy[0], expected, atol=1e-12)
        assert abs(scores.entropy[0] - 1.0397207708399179) < 1e-12

    def test_entropy_bounds_and_argmax_ties(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            k = int(rng.integers(2, 7))
            raw = rng.random((10, k))
            proba = raw / raw.sum(axis=1, keepdims=True)
            scores = scores_of(np.arange(10), proba)
            assert np.all(scores.entropy >= 0)
            assert np.all(scores.entropy <= np.log(k) + 1e-9)
        tie = scores_of([7], [[0.4, 0.4, 0.2]])
        assert tie.pseudo_label[0] == 0

    def test_score_pool_matches_model(self):
        rng = np.random.default_rng(5)
        pool = FeaturePool(np.arange(6), rng.normal(size=(6, 3)), None, 4)
        model = LinearProbe(rng.normal(size=(4, 3)), rng.normal(size=4))
        scores = score_pool(model, pool)
        assert scores.proba.shape == (6, 4)
        np.testing.assert_allclose(scores.proba.sum(axis=1), 1.0, atol=1e-9)
        np.testing.assert_allclose(
            scores.entropy, entropy_nats(scores.proba), atol=1e-12
        )

    def test_empty_pool_rejected(self):
        pool = FeaturePool(np.arange(1), np.ones((1, 2)), None, 2)
        with pytest.raises(InvalidInputError):
            score_pool(LinearProbe.zeros(2, 2), FeaturePool([], np.zeros((0, 2)), None, 2))
        del pool


class TestEntropySelect:
    def test_argmax(self):
        scores = scores_of([10, 11, 12], [[0.95, 0.05], [0.5, 0.5], [0.75, 0.25]])
        out = select_entropy(scores, request(1, [10, 11, 12], [0, 0]))
        assert out.tolist() == [11]

    def test_tie_takes_lowest_ids(self):
        scores = scores_of([5, 3, 9], np.full((3, 2), 0.5))
        out = select_entropy(scores, request(2, [5, 3, 9], [0, 0]))
        assert out.tolist() == [3, 5]

    def test_exhaustive_budget(self):
        scores = scores_of([4, 2], [[1.0, 0.0], [0.5, 0.5]])
        out = select_entropy(scores, request(2, [4, 2], [0, 0]))
        assert sorted(out.tolist()) == [2, 4]

    def test_budget_exceeds_pool(self):
        with pytest.raises(BudgetError):
            request(3, [1, 2], [0, 0])

    def test_matches_bruteforce_top_n(self):
        rng = np.random.default_rng(21)
        for _ in range(1000):
            n = int(rng.integers(1, 200))
            ids = np.sort(rng.choice(100_000, size=n, replace=False))
            raw = rng.random((n, 3)) + 1e-9
            proba = raw / raw.sum(axis=1, keepdims=True)
            scores = scores_of(ids, proba)
            budget = int(rng.integers(1, n + 1))
            got = select_entropy(scores, request(budget, ids, [0, 0, 0]))
            ranked = sorted(zip(scores.entropy, -ids), reverse=True)
            expected = {int(-neg_id) for _, neg_id in ranked[:budget]}
            assert set(got.tolist()) == expected


class TestRandomSelect:
    def test_exhaustive(self):
        scores = scores_of([1, 2, 3], np.full((3, 2), 0.5))
        out = select_random(scores, request(3, [1, 2, 3], [0, 0], seed=9))
        assert sorted(out.tolist()) == [1, 2, 3]

    def test_deterministic(self):
        scores = scores_of(np.arange(50), np.full((50, 2), 0.5))
        a = select_random(scores, request(10, np.arange(50), [0, 0], seed=77))
        b = select_random(scores, request(10, np.arange(50), [0, 0], seed=77))
        assert a.tolist() == b.tolist()

    def test_unbiased_frequency(self):
        ids = np.array([100, 200, 300, 400])
        scores = scores_of(ids, np.full((4, 2), 0.5))
        hits = {int(i): 0 for i in ids}
        for trial in range(10_000):
            out = select_random(scores, request(1, ids, [0, 0], seed=trial))
            hits[int(out[0])] += 1
        for count in hits.values():
            assert 2350 <= count <= 2650


class TestCoreset:
    def one_d_instance(self):
        # points 0, 1, 10 on a line, embedded in 2-d
        feats = np.array([[0.0, 0.0], [1.0, 0.0], [10.0, 0.0]])
        return FeaturePool([0, 1, 10], feats, None, 2)

    def test_farthest_point_first(self):
        pool = self.one_d_instance()
        out = select_coreset(pool, [0], request(1, [1, 10], [0, 0]))
        assert out.tolist() == [10]

    def test_second_pick_maximizes_min_distance(self):
        pool = self.one_d_instance()
        out = select_coreset(pool, [0], request(2, [1, 10], [0, 0]))
        assert out.tolist() == [10, 1]

    def test_identical_candidates_take_lowest_ids(self):
        feats = np.vstack([np.zeros((1, 3)), np.ones((4, 3))])
        pool = FeaturePool([50, 7, 3, 11, 5], feats, None, 2)
        out = select_coreset(pool, [50], request(3, [7, 3, 11, 5], [0, 0]))
        assert out.tolist() == [3, 5, 7]

    def test_needs_a_center(self):
        pool = self.one_d_instance()
        with pytest.raises(InvalidInputError):
            select_coreset(pool, [], request(1, [1, 10], [0, 0]))

    def test_greedy_two_approximation_exhaustively(self):
        rng = np.random.default_rng(31)
        for _ in range(60):
            n = int(rng.integers(3, 13))
            budget = int(rng.integers(1, min(3, n - 1) + 1))
            feats = rng.normal(size=(n, 2))
            ids = np.arange(n)
            pool = FeaturePool(ids, feats, None, 2)
            labeled = [0]
            cand = ids[1:]
            got = select_coreset(pool, labeled, request(budget, cand, [0, 0]))

            def radius(centers):
                c = feats[list(centers)]
                d = np.linalg.norm(feats[cand][:, None, :] - c[None, :, :], axis=2)
                return d.min(axis=1).max()

            greedy_radius = radius([0] + [int(np.flatnonzero(ids == g)[0]) for g in got])
            best = min(
                radius([0] + list(combo))
                for combo in itertools.combinations(range(1, n), budget)
            )
            assert greedy_radius <= 2.0 * best + 1e-9


class TestBadge:
    def test_gradient_embedding_closed_form(self):
        emb = gradient_embeddings(np.array([[1.0, 0.0]]), np.array([[0.7, 0.3]]))
        np.testing.assert_allclose(emb, [[-0.3, 0.0, 0.3, 0.0]], atol=1e-12)

    def test_identical_embeddings_fall_back_to_uniform(self):
        ids = np.arange(8)
        pool = FeaturePool(ids, np.ones((8, 2)), None, 2)
        scores = scores_of(ids, np.full((8, 2), 0.5))
        out = select_badge(pool, scores, request(4, ids, [0, 0], seed=13))
        assert len(set(out.tolist())) == 4

    def test_deterministic(self):
        rng = np.random.default_rng(6)
        ids = np.arange(30)
        pool = FeaturePool(ids, rng.normal(size=(30, 4)), None, 3)
        raw = rng.random((30, 3)) + 1e-9
        scores = scores_of(ids, raw / raw.sum(axis=1, keepdims=True))
        a = select_badge(pool, scores, request(6, ids, [0, 0, 0], seed=55))
        b = select_badge(pool, scores, request(6, ids, [0, 0, 0], seed=55))
        assert a.tolist() == b.tolist()
        c = select_badge(pool, scores, request(6, ids, [0, 0, 0], seed=56))
        assert len(set(c.tolist())) == 6

    def test_distinct_picks_cover_spread_clusters(self):
        # two far clusters: k-means++ should pick from both almost surely
        rng = np.random.default_rng(14)
        a = rng.normal(size=(20, 2)) * 0.01 + [100.0, 0.0]
        b = rng.normal(size=(20, 2)) * 0.01 - [100.0, 0.0]
        feats = np.vstack([a, b])
        ids = np.arange(40)
        pool = FeaturePool(ids, feats, None, 2)
        proba = np.zeros((40, 2))
        proba[:20, 0] = 0.9
        proba[:20, 1] = 0.1
        proba[20:, 0] = 0.4
        proba[20:, 1] = 0.6
        scores = scores_of(ids, proba)
        out = select_badge(pool, scores, request(2, ids, [0, 0], seed=3))
        sides = {int(i) < 20 for i in out}
        assert sides == {True, False}


class TestPCB:
    def test_balances_toward_empty_class(self):
        scores = scores_of([1, 2, 3], [[0.9, 0.1], [0.8, 0.2], [0.2, 0.8]])
        out = wrap_pcb(None, scores, request(1, [1, 2, 3], [5, 0]), candidate_fraction=1.0)
        assert out.tolist() == [3]

    def test_single_class_reduces_to_entropy_order(self):
        scores = scores_of([1, 2, 3], [[0.9, 0.1], [0.55, 0.45], [0.7, 0.3]])
        out = wrap_pcb(None, scores, request(2, [1, 2, 3], [0, 0]), candidate_fraction=1.0)
        assert out.tolist() == [2, 3]

    def test_fraction_filters_candidate_pool(self):
        ids = np.arange(20)
        proba = np.column_stack([np.linspace(0.05, 0.95, 20), 1 - np.linspace(0.05, 0.95, 20)])
        scores = scores_of(ids, proba)
        top5 = ids[:5]
        base = lambda r: top5[: r.budget]
        out = wrap_pcb(base, scores, request(3, ids, [0, 0], seed=1), candidate_fraction=0.25)
        assert set(out.tolist()).issubset(set(top5.tolist()))

    def test_fraction_too_small_for_budget(self):
        scores = scores_of(np.arange(10), np.full((10, 2), 0.5))
        with pytest.raises(BudgetError):
            wrap_pcb(None, scores, request(5, np.arange(10), [0, 0]), candidate_fraction=0.1)

    def test_pick_counts_balanced_when_surplus(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            k = int(rng.integers(2, 5))
            per_class = int(rng.integers(3, 7))
            n = k * per_class
            ids = np.arange(n)
            proba = np.full((n, k), 0.1 / (k - 1) if k > 1 else 1.0)
            for i in range(n):
                proba[i, i % k] = 0.9
            proba /= proba.sum(axis=1, keepdims=True)
            scores = scores_of(ids, proba)
            budget = int(rng.integers(1, min(n, 2 * k) + 1))
            out = wrap_pcb(
                None, scores, request(budget, ids, [0] * k, seed=1), candidate_fraction=1.0
            )
            picked_pseudo = [int(i) % k for i in out]
            histogram = np.bincount(picked_pseudo, minlength=k)
            assert histogram.max() - histogram.min() <= 1


class TestTFS:
    def test_rarest_then_max_entropy(self):
        scores = scores_of(
            [1, 2, 3],
            [[0.98, 0.02], [0.6, 0.4], [0.1, 0.9]],  # entropies: low, high, medium
        )
        oracle = {1: 0, 2: 0, 3: 1}.__getitem__
        out = select_tfs(scores, request(1, [1, 2, 3], [1, 2]), "oracle", oracle)
        assert out.tolist() == [2]

    def test_fallback_to_next_rarest(self):
        scores = scores_of([1, 2], [[0.1, 0.9], [0.3, 0.7]])  # all pseudo-labeled class 1
        oracle = {1: 1, 2: 1}.__getitem__
        out = select_tfs(scores, request(1, [1, 2], [0, 5]), "oracle", oracle)
        assert out.tolist() == [2]  # class-1 candidate with the higher entropy

    def test_equal_counts_start_from_class_zero(self):
        scores = scores_of([1, 2], [[0.9, 0.1], [0.2, 0.8]])
        oracle = {1: 0, 2: 1}.__getitem__
        out = select_tfs(scores, request(1, [1, 2], [3, 3]), "oracle", oracle)
        assert out.tolist() == [1]

    def test_oracle_mode_requires_oracle(self):
        scores = scores_of([1, 2], np.full((2, 2), 0.5))
        with pytest.raises(InvalidInputError):
            select_tfs(scores, request(1, [1, 2], [0, 0]), "oracle", None)

    def test_pseudo_mode_counts_pseudo_labels(self):
        # entropies: id2 > id1 within pseudo-class 0, id4 > id3 within class 1;
        # pseudo-mode counting alternates classes 0,1,0,1
        scores = scores_of(
            [1, 2, 3, 4],
            [[0.9, 0.1], [0.85, 0.15], [0.2, 0.8], [0.25, 0.75]],
        )
        out = select_tfs(scores, request(4, [1, 2, 3, 4], [0, 0]), "pseudo", None)
        assert out.tolist() == [2, 4, 1, 3]

    def test_matches_independent_simulator(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            k = int(rng.integers(2, 6))
            n = int(rng.integers(1, 51))
            ids = np.sort(rng.choice(10_000, size=n, replace=False))
            raw = rng.random((n, k)) + 1e-9
            proba = raw / raw.sum(axis=1, keepdims=True)
            scores = scores_of(ids, proba)
            truth = {int(i): int(rng.integers(0, k)) for i in ids}
            counts = rng.integers(0, 6, size=k)
            budget = int(rng.integers(1, n + 1))
            got = select_tfs(
                scores, request(budget, ids, counts, seed=1), "oracle", lambda i: truth[i]
            )
            expected = simulate_tfs_inner_loop(
                counts,
                [(int(i), int(scores.pseudo_label[r]), float(scores.entropy[r]))
                 for r, i in enumerate(ids)],
                lambda i: truth[i],
                budget,
            )
            assert got.tolist() == expected


class TestContracts:
    def test_every_strategy_returns_budget_distinct_candidates(self):
        rng = np.random.default_rng(44)
        ids = np.sort(rng.choice(1000, size=40, replace=False))
        feats = l2_normalize(rng.normal(size=(40, 5)))
        pool = FeaturePool(ids, feats, None, 3)
        raw = rng.random((40, 3)) + 1e-9
        scores = scores_of(ids, raw / raw.sum(axis=1, keepdims=True))
        req = request(7, ids, [1, 2, 3], seed=10)
        oracle = lambda i: int(i) % 3
        strategies = [
            select_random(scores, req),
            select_entropy(scores, req),
            select_coreset(pool, [int(ids[0])], request(7, ids[1:], [1, 2, 3], seed=10)),
            select_badge(pool, scores, req),
            wrap_pcb(None, scores, req, 1.0),
            select_tfs(scores, req, "oracle", oracle),
        ]
        for out in strategies:
            assert len(out) == 7
            assert len(set(out.tolist())) == 7
            assert set(out.tolist()).issubset(set(ids.tolist()))
