import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pairiqa.errors import ConfigurationError, ContractViolation, DegenerateInputError
from pairiqa.prompts import get_pair, make_pair
from pairiqa.scoring import (compare_images, cosine_similarity, pair_score, score_attributes, score_image,
                             single_prompt_score)

# values below were evaluated with mpmath at 40 digits
SIGMOID_2 = 0.8807970779778824440597291413023967952064  # 1 / (1 + e^-2)
E_OVER_E1 = 0.7310585786300048792511592418218362743651  # e / (e + 1)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
cos = st.floats(-1.0, 1.0, allow_nan=False)


def vec(dim):
    return st.lists(st.floats(-10, 10, allow_nan=False), min_size=dim, max_size=dim).filter(
        lambda v: np.linalg.norm(v) > 1e-3)


class TestCosine:
    def test_identical_and_orthogonal(self):
        assert cosine_similarity([1, 0], [1, 0]) == 1.0
        assert cosine_similarity([1, 0], [0, 1]) == 0.0

    def test_arithmetic_oracle(self):
        # (12 + 12) / (5 * 5)
        assert cosine_similarity([3, 4], [4, 3]) == pytest.approx(0.96, abs=1e-15)

    def test_single_prompt_examples(self):
        assert single_prompt_score([1, 0], [1, 0]) == 1.0
        assert single_prompt_score([0, 2], [0, 5]) == 1.0
        assert single_prompt_score([1, 1], [1, 0]) == pytest.approx(1 / math.sqrt(2), abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ContractViolation):
            cosine_similarity([1, 0, 0], [1, 0])

    def test_zero_norm(self):
        with pytest.raises(DegenerateInputError):
            cosine_similarity([0, 0], [1, 0])

    @pytest.mark.parametrize("bad", [[np.nan, 1.0], [np.inf, 0.0], []])
    def test_non_finite_or_empty(self, bad):
        with pytest.raises(ContractViolation):
            cosine_similarity(bad, [1.0, 0.0][: max(len(bad), 1)])

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 6).flatmap(lambda d: st.tuples(vec(d), vec(d))),
           st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
    def test_symmetric_scale_invariant_bounded(self, xt, a, b):
        x, t = np.array(xt[0]), np.array(xt[1])
        c = cosine_similarity(x, t)
        assert -1.0 <= c <= 1.0
        assert c == pytest.approx(cosine_similarity(t, x), abs=1e-12)
        assert cosine_similarity(a * x, b * t) == pytest.approx(c, abs=1e-9)


class TestPairScore:
    def test_examples(self):
        assert pair_score(0.3, 0.3) == 0.5
        assert pair_score(1.0, -1.0) == pytest.approx(SIGMOID_2, rel=1e-15)
        assert pair_score(-1.0, 1.0) == pytest.approx(1 - SIGMOID_2, rel=1e-14)

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_non_finite(self, bad):
        with pytest.raises(ContractViolation):
            pair_score(bad, 0.0)
        with pytest.raises(ContractViolation):
            pair_score(0.0, bad)

    @given(finite, finite)
    def test_matches_softmax_formula(self, s1, s2):
        # direct formula in high precision as the oracle
        import mpmath as mp
        mp.mp.dps = 50
        ref = mp.e ** mp.mpf(s1) / (mp.e ** mp.mpf(s1) + mp.e ** mp.mpf(s2))
        got = pair_score(s1, s2)
        if ref > 1e-300:
            assert abs(got - float(ref)) <= 1e-12 * float(ref) + 1e-300

    @given(cos, cos)
    def test_complement_and_range(self, s1, s2):
        assert abs(pair_score(s1, s2) + pair_score(s2, s1) - 1.0) <= 1e-12
        assert 0.0 < pair_score(s1, s2) < 1.0

    @given(cos, cos, st.floats(1e-6, 1.0))
    def test_monotone(self, s1, s2, delta):
        assert pair_score(s1 + delta, s2) > pair_score(s1, s2)
        assert pair_score(s1, s2 + delta) < pair_score(s1, s2)

    def test_scale_parameter(self):
        assert pair_score(1.0, -1.0, scale=100.0) == pytest.approx(1.0, abs=1e-80)
        assert pair_score(0.1, 0.0, scale=2.0) == pytest.approx(pair_score(0.2, 0.0), abs=1e-15)
        with pytest.raises(ContractViolation):
            pair_score(0.1, 0.0, scale=0.0)


class TestScoreImage:
    pair = make_pair("quality", "Good", "Bad")

    def test_positive_match(self):
        r = score_image([1, 0], self.pair, ([1, 0], [0, 1]))
        assert (r.s1, r.s2) == (1.0, 0.0)
        assert r.score == pytest.approx(E_OVER_E1, rel=1e-15)
        assert r.positive_prompt == "Good photo." and r.negative_prompt == "Bad photo."

    def test_swap_and_equidistant(self):
        a = score_image([0.3, 0.9], self.pair, ([1, 0], [0, 1])).score
        b = score_image([0.3, 0.9], self.pair, ([0, 1], [1, 0])).score
        assert a + b == pytest.approx(1.0, abs=1e-15)
        assert score_image([1, 1], self.pair, ([1, 0], [0, 1])).score == 0.5

    @settings(max_examples=200, deadline=None)
    @given(st.integers(2, 8).flatmap(lambda d: st.tuples(vec(d), vec(d), vec(d))), st.floats(1e-4, 1e4))
    def test_scale_invariance(self, vecs, k):
        x, t1, t2 = map(np.array, vecs)
        s = score_image(x, self.pair, (t1, t2)).score
        assert abs(score_image(k * x, self.pair, (t1, t2)).score - s) < 1e-9


class TestScoreAttributes:
    def provider(self, pair):
        rng = np.random.default_rng(abs(hash(pair.texts)) % 2**32)
        return rng.standard_normal(6), rng.standard_normal(6)

    def test_single_and_many(self):
        x = np.linspace(-1, 1, 6)
        p = get_pair("quality")
        assert score_attributes(x, [p], self.provider) == [score_image(x, p, self.provider(p))]
        abstract = [get_pair(a) for a in ("happy", "scary", "new", "warm", "lonely")]
        out = score_attributes(x, abstract, self.provider)
        assert [r.attribute for r in out] == ["happy", "scary", "new", "warm", "lonely"]
        assert all(0 < r.score < 1 for r in out)

    def test_permutation_equivariance(self):
        x = np.linspace(-1, 2, 6)
        pairs = [get_pair(a) for a in ("brightness", "sharpness", "natural")]
        out = {r.attribute: r for r in score_attributes(x, pairs, self.provider)}
        out_rev = score_attributes(x, pairs[::-1], self.provider)
        assert [r.attribute for r in out_rev] == ["natural", "sharpness", "brightness"]
        assert all(out[r.attribute] == r for r in out_rev)

    def test_errors(self):
        with pytest.raises(ConfigurationError):
            score_attributes([1, 0], [], self.provider)
        with pytest.raises(ConfigurationError):
            score_attributes(np.ones(6), [get_pair("quality"), get_pair("quality")], self.provider)


class TestCompare:
    pair = make_pair("quality", "Good", "Bad")
    texts = ([1.0, 0.0], [0.0, 1.0])

    def test_strict_and_tie(self):
        c = compare_images([1, 0.1], [0.2, 1], self.pair, self.texts)
        assert c.choice == "A" and not c.tie and c.score_a > c.score_b
        t = compare_images([1, 1], [1, 1], self.pair, self.texts)
        assert (t.choice, t.tie, t.decision) == ("A", True, "tie")

    @given(st.tuples(vec(2), vec(2)), st.floats(1e-3, 1e3))
    def test_antisymmetry_and_rescaling(self, ab, k):
        a, b = np.array(ab[0]), np.array(ab[1])
        ab_ = compare_images(a, b, self.pair, self.texts)
        ba = compare_images(b, a, self.pair, self.texts)
        if not ab_.tie:
            assert {ab_.choice, ba.choice} == {"A", "B"}
        scaled = compare_images(k * a, k * b, self.pair, self.texts)
        if abs(ab_.score_a - ab_.score_b) > 1e-9:
            assert scaled.choice == ab_.choice
