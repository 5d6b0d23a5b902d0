import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pragdec.probcore import (
    NEG_INF,
    EmptySupport,
    Rng,
    TokenDist,
    draw,
    log_sum_exp,
    normalize,
    truncate_top_k,
    truncate_top_p,
)


def dist(probs, normalized=True) -> TokenDist:
    arr = np.asarray(probs, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return TokenDist(np.log(arr), normalized=normalized)


@st.composite
def prob_vectors(draw_fn, min_size=2, max_size=30):
    n = draw_fn(st.integers(min_size, max_size))
    weights = draw_fn(
        st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=n, max_size=n)
    )
    arr = np.asarray(weights) + 1e-9
    return arr / arr.sum()


class TestTokenDist:
    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            TokenDist(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            TokenDist(np.zeros(0))

    def test_array_is_frozen(self):
        d = dist([0.5, 0.5])
        with pytest.raises(ValueError):
            d.logp[0] = 0.0

    def test_argmax_ties_take_lowest_index(self):
        assert dist([0.25, 0.25, 0.5], normalized=True).argmax() == 2
        assert dist([0.5, 0.5]).argmax() == 0

    def test_probs_roundtrip(self):
        p = np.array([0.1, 0.2, 0.7])
        np.testing.assert_allclose(dist(p).probs(), p, atol=1e-12)


class TestLogSumExp:
    def test_spec_value(self):
        # log(e^0 + e^0 + e^0) = ln 3
        assert log_sum_exp(np.zeros(3)) == pytest.approx(np.log(3.0), abs=1e-12)

    def test_single_element_exact(self):
        assert log_sum_exp(np.array([-3.25])) == -3.25

    def test_extreme_shift_is_stable(self):
        x = np.array([-1e6, -1e6 + np.log(2.0)])
        assert log_sum_exp(x) == pytest.approx(-1e6 + np.log(3.0), abs=1e-9)

    def test_empty_and_all_excluded_raise(self):
        with pytest.raises(EmptySupport):
            log_sum_exp(np.array([]))
        with pytest.raises(EmptySupport):
            log_sum_exp(np.array([NEG_INF, NEG_INF]))

    @given(prob_vectors())
    def test_matches_numpy_oracle(self, p):
        x = np.log(p) + 2.5
        expect = np.log(np.exp(x).sum())
        assert log_sum_exp(x) == pytest.approx(expect, abs=1e-9)


class TestNormalize:
    @given(prob_vectors())
    def test_sums_to_one(self, p):
        d = TokenDist(np.log(p * 7.0))
        out = normalize(d)
        assert out.normalized
        assert np.exp(out.logp).sum() == pytest.approx(1.0, abs=1e-12)

    def test_preserves_argmax(self):
        d = TokenDist(np.array([0.1, 2.0, -1.0]))
        assert normalize(d).argmax() == d.argmax()

    def test_all_excluded_raises(self):
        with pytest.raises(EmptySupport):
            normalize(TokenDist(np.full(3, NEG_INF)))


class TestTruncateTopK:
    def test_keeps_top_k(self):
        d = dist([0.5, 0.3, 0.15, 0.05])
        out = truncate_top_k(d, 2)
        np.testing.assert_allclose(
            np.exp(out.logp), [0.625, 0.375, 0.0, 0.0], atol=1e-12
        )

    def test_k_at_least_vocab_is_identity(self):
        d = dist([0.5, 0.5])
        out = truncate_top_k(d, 5)
        np.testing.assert_allclose(out.logp, d.logp, atol=1e-12)

    def test_tie_break_lower_index(self):
        d = dist([0.25, 0.25, 0.25, 0.25])
        out = truncate_top_k(d, 2)
        assert np.isfinite(out.logp[0]) and np.isfinite(out.logp[1])
        assert out.logp[2] == NEG_INF and out.logp[3] == NEG_INF

    def test_requires_normalized(self):
        with pytest.raises(ValueError):
            truncate_top_k(TokenDist(np.zeros(3)), 1)
        with pytest.raises(ValueError):
            truncate_top_k(dist([1.0]), 0)


class TestTruncateTopP:
    def test_spec_example(self):
        d = dist([0.5, 0.3, 0.15, 0.05])
        out = truncate_top_p(d, 0.9)
        np.testing.assert_allclose(
            np.exp(out.logp),
            [0.5 / 0.95, 0.3 / 0.95, 0.15 / 0.95, 0.0],
            atol=1e-12,
        )

    def test_boundary_token_included(self):
        # Dyadic probabilities so the cumulative sum is exact: mass reaches p
        # exactly at the second token, which stays in; the third is cut.
        d = dist([0.5, 0.25, 0.25])
        out = truncate_top_p(d, 0.75)
        assert np.isfinite(out.logp[1])
        assert out.logp[2] == NEG_INF

    def test_p_one_keeps_everything(self):
        d = dist([0.7, 0.2, 0.1])
        out = truncate_top_p(d, 1.0)
        assert np.isfinite(out.logp).all()

    def test_rejects_bad_p(self):
        d = dist([1.0])
        for p in (0.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                truncate_top_p(d, p)

    @given(prob_vectors(), st.floats(0.05, 1.0))
    @settings(max_examples=50)
    def test_kept_mass_reaches_p(self, probs, p):
        d = dist(probs)
        out = truncate_top_p(d, p)
        kept = np.exp(d.logp[np.isfinite(out.logp)]).sum()
        assert kept >= p - 1e-9


class TestDraw:
    def test_deterministic_per_seed(self):
        d = dist([0.3, 0.3, 0.4])
        a = [draw(d, Rng(99)) for _ in range(1)]
        stream1 = Rng(42)
        stream2 = Rng(42)
        xs = [draw(d, stream1) for _ in range(20)]
        ys = [draw(d, stream2) for _ in range(20)]
        assert xs == ys
        assert a == [draw(d, Rng(99))]

    def test_never_returns_excluded(self):
        d = dist([0.0, 1.0, 0.0])
        rng = Rng(0)
        assert all(draw(d, rng) == 1 for _ in range(200))

    def test_uniform_frequencies(self):
        # Spec example: uniform over 4, 100k draws, 0.25 +/- 0.01 each.
        d = dist([0.25, 0.25, 0.25, 0.25])
        rng = Rng(7)
        counts = np.zeros(4)
        n = 100_000
        for _ in range(n):
            counts[draw(d, rng)] += 1
        np.testing.assert_allclose(counts / n, 0.25, atol=0.01)

    def test_requires_normalized(self):
        with pytest.raises(ValueError):
            draw(TokenDist(np.zeros(2)), Rng(0))


class TestRng:
    def test_unknown_algorithm_rejected(self):
        with pytest.raises(ValueError):
            Rng(0, algorithm="mt19937")

    def test_uniform_in_unit_interval(self):
        rng = Rng(5)
        xs = [rng.uniform() for _ in range(1000)]
        assert all(0.0 <= x < 1.0 for x in xs)
