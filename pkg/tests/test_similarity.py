import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simcf.ratings import Rating, RatingMatrix, RatingScale
from simcf.similarity import (
    BASE_MEASURES,
    COMBINED_MEASURES,
    CombinedMeasure,
    Measure,
    SimilarityContext,
    build_singularity_tables,
    combine,
    cosine,
    ij,
    jaccard,
    pearson,
    proximity,
    pss,
    registry,
    significance,
    singularity,
    ta,
)

from conftest import small_matrices
from oracles import Naive


def ctx_of(rows, **kw):
    m = RatingMatrix.from_ratings([Rating(u, i, v) for u, i, v in rows], **kw)
    return SimilarityContext(m)


WIDE = RatingScale(0, 10, 3)


def pair_vectors(v1, v2, **kw):
    """Two users who both rated items 1..len(v1)."""
    return ctx_of([(1, j + 1, x) for j, x in enumerate(v1)] + [(2, j + 1, x) for j, x in enumerate(v2)], **kw)


class TestMeasureIds:
    def test_parse_case_insensitive(self):
        assert Measure.parse("taj") is Measure.TA_J
        assert Measure.parse("PSSIJ") is Measure.PSS_IJ

    def test_unknown_lists_all(self):
        with pytest.raises(ValueError) as exc:
            Measure.parse("dice")
        for m in Measure:
            assert m.value in str(exc.value)

    def test_registry(self):
        reg = registry()
        assert len(reg) == 14
        assert list(reg) == list(Measure)
        assert reg[Measure.TA_J] == combine(Measure.JACCARD, Measure.TA)
        assert "Dice" not in reg

    def test_factors(self):
        assert Measure.PSS_J.factors == (Measure.JACCARD, Measure.PSS)
        assert Measure.PSS_IJ.factors == (Measure.IJ, Measure.PSS)
        assert len(COMBINED_MEASURES) == 8 and len(BASE_MEASURES) == 6

    @pytest.mark.parametrize("args", [("Cosine", "Jaccard"), ("Jaccard", "IJ"), ("TAJ", "TA")])
    def test_combine_rejects(self, args):
        with pytest.raises(ValueError):
            combine(*args)


class TestJaccard:
    def test_identical(self):
        assert jaccard(pair_vectors([1, 2], [4, 5]), 1, 2) == 1

    def test_disjoint(self):
        assert jaccard(ctx_of([(1, 1, 3), (2, 2, 3)]), 1, 2) == 0

    def test_quarter(self):
        ctx = ctx_of([(1, 1, 1), (1, 2, 1), (1, 3, 1), (2, 3, 1), (2, 4, 1)])
        assert jaccard(ctx, 1, 2) == 0.25

    def test_both_empty(self):
        assert jaccard(ctx_of([(1, 1, 3)], num_users=3), 2, 3) == 0


class TestCosine:
    def test_identical(self):
        assert cosine(pair_vectors([1, 4, 2], [1, 4, 2]), 1, 2) == pytest.approx(1, abs=1e-15)

    def test_single_item_degenerate(self):
        assert cosine(pair_vectors([2], [5]), 1, 2) == 1

    def test_parallel(self):
        assert cosine(pair_vectors([1, 2], [2, 4], scale=WIDE), 1, 2) == pytest.approx(1, abs=1e-15)

    def test_full_norms(self):
        m = RatingMatrix.from_ratings([Rating(1, 1, 3), Rating(1, 2, 4), Rating(2, 1, 3)])
        ctx = SimilarityContext(m, full_norms=True)
        assert cosine(ctx, 1, 2) == pytest.approx(9 / (5 * 3))
        assert cosine(SimilarityContext(m), 1, 2) == 1


class TestPearson:
    def test_positive(self):
        assert pearson(pair_vectors([1, 2, 3], [2, 4, 6], scale=WIDE), 1, 2) == pytest.approx(1)

    def test_negative(self):
        assert pearson(pair_vectors([1, 2, 3], [6, 4, 2], scale=WIDE), 1, 2) == pytest.approx(-1)

    def test_constant_user(self):
        assert pearson(pair_vectors([1, 2, 3], [4, 4, 4]), 1, 2) == 0

    def test_full_set_mean(self):
        # user 1's mean includes item 3, which user 2 never rated
        ctx = ctx_of([(1, 1, 1), (1, 2, 3), (1, 3, 5), (2, 1, 1), (2, 2, 5)])
        m1, m2 = 3.0, 3.0
        xs, ys = [1 - m1, 3 - m1], [1 - m2, 5 - m2]
        expected = sum(x * y for x, y in zip(xs, ys)) / math.sqrt(sum(x * x for x in xs) * sum(y * y for y in ys))
        assert pearson(ctx, 1, 2) == pytest.approx(expected)


class TestPSS:
    def test_components_at_median(self):
        assert proximity(3, 3) == 0.5
        assert significance(3, 3, 3) == 0.5
        assert singularity(3, 3, 3) == 0.5

    def test_single_item(self):
        assert pss(pair_vectors([3], [3]), 1, 2) == 0.125

    def test_item_mean_fallback(self):
        ctx = ctx_of([(1, 1, 3)], num_items=2)
        assert ctx.item_means[1] == 3.0

    @given(st.floats(1, 5), st.floats(1, 5), st.floats(1, 5))
    def test_component_bounds(self, a, b, mu):
        for v in (proximity(a, b), significance(a, b, 3), singularity(a, b, mu)):
            assert 0 < v < 1


class TestTA:
    def test_identity(self):
        assert ta(pair_vectors([2, 5, 1], [2, 5, 1]), 1, 2) == pytest.approx(1)

    def test_three_four_five(self):
        assert ta(pair_vectors([3, 4], [6, 8], scale=WIDE), 1, 2) == pytest.approx(0.5)
        assert ta(pair_vectors([6, 8], [3, 4], scale=WIDE), 1, 2) == pytest.approx(0.5)

    def test_negative_branch(self):
        m = RatingMatrix.from_ratings(
            [Rating(1, 1, 1), Rating(1, 2, -2), Rating(2, 1, 2), Rating(2, 2, 3)],
            scale=RatingScale(-5, 5),
        )
        ctx = SimilarityContext(m, relevance_threshold=0)
        dot, n1, n2 = 1 * 2 + -2 * 3, math.sqrt(5), math.sqrt(13)
        assert ta(ctx, 1, 2) == pytest.approx(dot / n2**2)
        assert ctx.matrix(Measure.TA)[0, 1] == pytest.approx(dot / n2**2)
        assert n1 <= n2

    def test_empty_intersection(self):
        assert ta(ctx_of([(1, 1, 3), (2, 2, 3)]), 1, 2) == 0


class TestSingularity:
    def test_hand_count(self):
        ctx = ctx_of([(1, 1, 5), (2, 1, 5), (3, 1, 2)], num_users=4)
        t = ctx.singularities
        assert (t.positive[0], t.negative[0], t.empty[0]) == (0.5, 0.75, 0.75)

    def test_all_positive(self):
        t = build_singularity_tables(RatingMatrix.from_ratings([Rating(u, 1, 5) for u in (1, 2)]))
        assert t.positive[0] == 0 and t.empty[0] == 1

    def test_unrated_item(self):
        t = build_singularity_tables(RatingMatrix.from_ratings([Rating(1, 1, 5)], num_items=2))
        assert (t.positive[1], t.negative[1], t.empty[1]) == (1, 1, 0)


class TestIJ:
    def test_same_items_same_polarity(self):
        # a third, silent user keeps the singularities nonzero
        assert ij(pair_vectors([5, 1, 4], [4, 2, 5], num_users=3), 1, 2) == pytest.approx(1)

    def test_disjoint(self):
        assert ij(ctx_of([(1, 1, 5), (2, 2, 1)], num_users=3), 1, 2) == 0

    def test_hand_matrix(self):
        rows = [
            (1, 1, 5), (1, 2, 2), (1, 3, 4), (1, 4, 1),
            (2, 1, 4), (2, 2, 4), (2, 3, 1), (2, 5, 5),
            (3, 1, 1), (3, 4, 3), (3, 5, 2),
            (4, 2, 5), (4, 3, 5), (4, 4, 4), (4, 5, 1),
        ]
        ctx = ctx_of(rows)
        naive = Naive(rows, 4, 5)
        for a in range(1, 5):
            for b in range(1, 5):
                assert ij(ctx, a, b) == pytest.approx(naive.ij(a, b), abs=1e-12)


def _every_pair(matrix):
    n = matrix.num_users
    return [(a, b) for a in range(1, n + 1) for b in range(1, n + 1)]


@settings(max_examples=60)
@given(small_matrices(), st.booleans())
def test_pairwise_and_matrix_match_oracle(pair, full):
    matrix, naive = pair
    ctx = SimilarityContext(matrix, full_norms=full)
    reg = registry()
    for m in Measure:
        dense = ctx.matrix(m)
        for a, b in _every_pair(matrix):
            want = naive.measure(m.value, a, b, full)
            assert reg[m](ctx, a, b) == pytest.approx(want, abs=1e-12), (m, a, b)
            assert dense[a - 1, b - 1] == pytest.approx(want, abs=1e-12), (m, a, b)


@given(small_matrices())
def test_product_identity_exact(pair):
    matrix, _ = pair
    ctx = SimilarityContext(matrix)
    reg = registry()
    for m in COMBINED_MEASURES:
        s, num = m.factors
        assert np.array_equal(ctx.matrix(m), ctx.matrix(s) * ctx.matrix(num))
        for a, b in _every_pair(matrix):
            assert reg[m](ctx, a, b) == reg[s](ctx, a, b) * reg[num](ctx, a, b)


@given(small_matrices())
def test_symmetry_and_ranges(pair):
    matrix, _ = pair
    ctx = SimilarityContext(matrix)
    for m in Measure:
        sim = ctx.matrix(m)
        assert np.array_equal(sim, sim.T), m
    for m in (Measure.JACCARD, Measure.IJ, Measure.COSINE):
        assert ((ctx.matrix(m) >= 0) & (ctx.matrix(m) <= 1)).all(), m
    p = ctx.matrix(Measure.PEARSON)
    assert ((p >= -1) & (p <= 1)).all()
    for a, b in _every_pair(matrix):
        shared = len(set(matrix.user_ratings(a)) & set(matrix.user_ratings(b)))
        t = ta(ctx, a, b)
        assert (0 < t <= 1) if shared else t == 0
        q = pss(ctx, a, b)
        assert (0 <= q < shared) if shared else q == 0
        if shared == 0:
            for m in Measure:
                if m not in (Measure.JACCARD, Measure.IJ):
                    assert ctx.matrix(m)[a - 1, b - 1] == 0, m


def test_either_factor_zero():
    # single shared item gives Pearson 0 through zero variance
    ctx = ctx_of([(1, 1, 4), (1, 2, 4), (2, 1, 3), (2, 3, 5)])
    assert jaccard(ctx, 1, 2) > 0 and pearson(ctx, 1, 2) == 0
    assert combine(Measure.JACCARD, Measure.PEARSON)(ctx, 1, 2) == 0


def test_combined_id():
    assert CombinedMeasure(Measure.IJ, Measure.COSINE).id is Measure.COSINE_IJ


def test_random_10x12_product_identity():
    rng = np.random.default_rng(7)
    rows = [(u, i, int(rng.integers(1, 6))) for u in range(1, 11) for i in range(1, 13) if rng.random() < 0.6]
    ctx = ctx_of(rows, num_users=10, num_items=12)
    reg = registry()
    for m in COMBINED_MEASURES:
        s, num = m.factors
        for a in range(1, 11):
            for b in range(1, 11):
                assert reg[m](ctx, a, b) == reg[s](ctx, a, b) * reg[num](ctx, a, b)


def test_matrix_cache_concurrent():
    rng = np.random.default_rng(3)
    rows = [(u, i, int(rng.integers(1, 6))) for u in range(1, 30) for i in range(1, 40) if rng.random() < 0.3]
    ctx = ctx_of(rows)
    fresh = SimilarityContext(ctx.train)
    results = []

    def work():
        results.append([ctx.matrix(m) for m in Measure])

    threads = [threading.Thread(target=work) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for got in results:
        for m, arr in zip(Measure, got):
            assert arr is results[0][list(Measure).index(m)]
            assert np.array_equal(arr, fresh.matrix(m))
