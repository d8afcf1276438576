import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from hypothesis import given, settings, strategies as st

from lossrank.criteria import (
    Criterion,
    CriterionInput,
    alpha_star,
    bic,
    bic_score,
    bic_tilde,
    default_ridge_scale,
    entropy,
    gcv_lasso,
    is_feasible,
    kl_bernoulli,
    lasso_df,
    loss_rank,
    loss_rank_alpha,
    loss_rank_entropy_form,
)
from lossrank.errors import AllZeroCoefficients, DomainError, Infeasible, PerfectFit

from conftest import raw_standardized

# independently evaluated at 50 digits
LR_REFERENCE = 205.52691243870095
KL_HALF_QUARTER = 0.14384103622589045
H_005 = 0.19851524334587256
BIC_REFERENCE = 11.51292546497023


@st.composite
def feasible_inputs(draw):
    n = draw(st.integers(5, 5000))
    df = draw(st.integers(1, n - 2))
    # keep n (1 - rho) > df with some margin
    rho_max = 1.0 - (df + 0.5) / n
    rho = draw(st.floats(1e-6, max(rho_max, 2e-6)))
    yy = draw(st.floats(1e-3, 1e6))
    return CriterionInput(n, yy, rho, df)


def random_feasible(rng, count):
    out = []
    while len(out) < count:
        n = int(rng.integers(5, 3000))
        df = int(rng.integers(1, n - 1))
        rho = float(rng.uniform(1e-6, 1.0))
        inp = CriterionInput(n, float(10 ** rng.uniform(-2, 5)), rho, df)
        if is_feasible(inp):
            out.append(inp)
    return out


class TestCriterionTags:
    @pytest.mark.parametrize("tag,expected", [
        ("lr", Criterion.LR), ("BIC", Criterion.BIC), ("gcv", Criterion.GCV),
        ("BIC_TILDE", Criterion.BIC_TILDE), ("bic~", Criterion.BIC_TILDE), ("bic-tilde", Criterion.BIC_TILDE),
    ])
    def test_parse(self, tag, expected):
        assert Criterion.parse(tag) is expected

    def test_unknown(self):
        with pytest.raises(ValueError):
            Criterion.parse("AIC")


class TestKLAndEntropy:
    def test_identical(self):
        assert kl_bernoulli(0.3, 0.3) == pytest.approx(0.0, abs=1e-15)

    def test_reference(self):
        assert_allclose(kl_bernoulli(0.5, 0.25), KL_HALF_QUARTER, rtol=1e-14)
        assert_allclose(kl_bernoulli(0.5, 0.25), 0.5 * math.log(4 / 3), rtol=1e-14)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0.001, 0.999), st.floats(0.001, 0.999))
    def test_symmetry_and_nonnegativity(self, p, q):
        assert kl_bernoulli(p, q) >= -1e-15
        assert_allclose(kl_bernoulli(p, q), kl_bernoulli(1 - p, 1 - q), rtol=1e-9, atol=1e-14)

    def test_entropy_values(self):
        assert_allclose(entropy(0.5), math.log(2), rtol=1e-15)
        assert_allclose(entropy(0.05), H_005, rtol=1e-14)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(1e-6, 1 - 1e-6))
    def test_entropy_symmetry(self, p):
        assert_allclose(entropy(p), entropy(1 - p), rtol=1e-9)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
    def test_domain(self, p):
        with pytest.raises(DomainError):
            kl_bernoulli(p, 0.5)
        with pytest.raises(DomainError):
            entropy(p)


class TestAlphaStar:
    def test_reference(self):
        assert_allclose(alpha_star(CriterionInput(100, 100.0, 0.5, 5)), 2.5 / 45, rtol=1e-14)

    def test_boundary_infeasible(self):
        with pytest.raises(Infeasible):
            alpha_star(CriterionInput(100, 1.0, 0.5, 50))

    def test_local_minimum(self, rng):
        for inp in random_feasible(rng, 200):
            a = alpha_star(inp)
            v = loss_rank_alpha(inp, a)
            assert v <= loss_rank_alpha(inp, a * (1 + 1e-3)) + 1e-9
            assert v <= loss_rank_alpha(inp, a * (1 - 1e-3)) + 1e-9

    def test_stationary_value_matches_closed_form(self):
        inp = CriterionInput(100, 100.0, 0.5, 5)
        assert_allclose(loss_rank_alpha(inp, alpha_star(inp)), loss_rank(inp).value, rtol=1e-10)


class TestLossRankAlpha:
    def test_diverges_at_boundaries(self):
        inp = CriterionInput(100, 100.0, 0.5, 5)
        v_star = loss_rank_alpha(inp, alpha_star(inp))
        assert loss_rank_alpha(inp, 1e12) > v_star
        assert loss_rank_alpha(inp, 1e-12) > v_star

    def test_nonpositive_alpha(self):
        with pytest.raises(DomainError):
            loss_rank_alpha(CriterionInput(100, 1.0, 0.5, 5), 0.0)


class TestLossRank:
    def test_reference(self):
        sc = loss_rank(CriterionInput(100, 100.0, 0.5, 5))
        assert sc.feasible
        assert_allclose(sc.value, LR_REFERENCE, rtol=1e-13)
        assert_allclose(sc.value, 50 * math.log(100) - 50 * kl_bernoulli(0.05, 0.5), rtol=1e-14)

    def test_kl_vanishes_at_boundary(self):
        # df/n = 1 - rho is itself infeasible; approach it from the feasible side
        assert not loss_rank(CriterionInput(100, 37.0, 0.8, 20)).feasible
        inp = CriterionInput(100, 37.0, 0.8 - 1e-12, 20)
        assert_allclose(loss_rank(inp).value, 50 * math.log(37.0), rtol=1e-9)

    @pytest.mark.parametrize("rho,df", [(0.5, 50), (0.5, 60), (0.99, 5)])
    def test_infeasible(self, rho, df):
        sc = loss_rank(CriterionInput(100, 1.0, rho, df))
        assert not sc.feasible
        assert sc.value == math.inf

    def test_exact_fit(self):
        sc = loss_rank(CriterionInput(100, 1.0, 0.0, 3))
        assert sc.feasible and sc.value == -math.inf

    def test_kl_form_equals_entropy_form(self, rng):
        for inp in random_feasible(rng, 1000):
            a = loss_rank(inp).value
            b = loss_rank_entropy_form(inp)
            assert abs(a - b) <= 1e-10 * max(1.0, abs(a))

    @settings(max_examples=200, deadline=None)
    @given(feasible_inputs())
    def test_is_infimum_over_alpha(self, inp):
        v = loss_rank(inp).value
        for a in np.logspace(-8, 8, 33):
            assert v <= loss_rank_alpha(inp, float(a)) + 1e-8 * max(1.0, abs(v))

    def test_response_scaling_shift(self):
        inp = CriterionInput(80, 12.0, 0.3, 4)
        c = 7.0
        scaled = CriterionInput(80, 12.0 * c * c, 0.3, 4)
        assert_allclose(loss_rank(scaled).value - loss_rank(inp).value, 80 * math.log(c), rtol=1e-12)

    def test_asymptotic_bic_equivalence(self):
        rho, df = 0.3, 5
        gaps = []
        for n in (10**2, 10**3, 10**4, 10**5, 10**6):
            yy = float(n)
            sigma2 = rho * yy / n
            lr = loss_rank(CriterionInput(n, yy, rho, df)).value
            gaps.append(abs(lr - (bic(n, sigma2, df) + 0.5 * n * math.log(n))))
        assert max(gaps) <= 2 * gaps[0]


class TestBic:
    def test_reference(self):
        assert_allclose(bic(100, 1.0, 5), BIC_REFERENCE, rtol=1e-14)

    def test_zero_df(self):
        assert bic(100, 1.0, 0) == 0.0

    def test_linear_in_df(self):
        assert_allclose(bic(50, 2.0, 6) - bic(50, 2.0, 3), 3 * math.log(50) / 2, rtol=1e-13)

    def test_zero_variance(self):
        with pytest.raises(DomainError):
            bic(10, 0.0, 1)
        sc = bic_score(10, 0.0, 1)
        assert sc.value == -math.inf and not sc.feasible


def dense_df(X, beta, lam, ridge_scale):
    A = np.flatnonzero(beta)
    XA = X[:, A]
    W = np.diag(1.0 / np.abs(beta[A]))
    H = XA @ np.linalg.inv(XA.T @ XA + ridge_scale * lam * W) @ XA.T
    return float(np.trace(H))


class TestLassoCriteria:
    # x = (1, 0, 0), y = (4, 0, 0): beta(lambda=2) = 3
    single = raw_standardized([[1.0], [0.0], [0.0]], [4.0, 0.0, 0.0])

    @pytest.mark.parametrize("ridge", [0.5, 1.0, None])
    def test_single_covariate_dense_oracle(self, ridge):
        beta = np.array([3.0])
        scale = default_ridge_scale(3) if ridge is None else ridge
        DF = dense_df(self.single.Xs, beta, 2.0, scale)
        assert_allclose(lasso_df(self.single, beta, 2.0, ridge), DF, rtol=1e-10)
        rss = 1.0
        assert_allclose(gcv_lasso(self.single, beta, 2.0, ridge), (rss / 3) / (1 - DF / 3) ** 2, rtol=1e-10)
        assert_allclose(bic_tilde(self.single, beta, 2.0, ridge), math.log(rss / 3) + DF * math.log(3) / 3, rtol=1e-10)

    def test_exact_ridge_factor_reproduces_lasso(self):
        # with the factor 1/2 the ridge system is solved by the lasso estimate itself
        beta = np.array([3.0])
        assert_allclose(lasso_df(self.single, beta, 2.0, 0.5), 0.75, rtol=1e-12)

    def test_dense_oracle_random(self, rng):
        X = rng.standard_normal((30, 6))
        data = raw_standardized(X, rng.standard_normal(30))
        beta = np.array([0.7, 0.0, -1.3, 0.2, 0.0, 2.0])
        for lam in (0.1, 1.0, 5.0):
            assert_allclose(lasso_df(data, beta, lam), dense_df(X, beta, lam, default_ridge_scale(30)), rtol=1e-8)

    def test_small_lambda_limit(self, rng):
        X = rng.standard_normal((25, 4))
        y = rng.standard_normal(25)
        data = raw_standardized(X, y)
        beta = np.linalg.lstsq(X, y, rcond=None)[0]
        lam = 1e-10
        assert_allclose(lasso_df(data, beta, lam), 4.0, atol=1e-6)
        rss = float(np.sum((y - X @ beta) ** 2))
        assert_allclose(gcv_lasso(data, beta, lam), (rss / 25) / (1 - 4 / 25) ** 2, rtol=1e-6)
        assert_allclose(bic_tilde(data, beta, lam), math.log(rss / 25) + 4 * math.log(25) / 25, rtol=1e-6)

    def test_rss_grows_with_shrinkage(self):
        prev = -1.0
        for lam in (0.5, 1.0, 2.0, 4.0, 7.5):
            beta = np.array([(8 - lam) / 2])
            rss = float(np.sum((self.single.ys - self.single.Xs @ beta) ** 2))
            assert rss >= prev
            prev = rss

    def test_all_zero(self):
        with pytest.raises(AllZeroCoefficients):
            gcv_lasso(self.single, np.zeros(1), 1.0)

    def test_perfect_fit(self):
        data = raw_standardized([[1.0], [0.0], [0.0]], [4.0, 0.0, 0.0])
        with pytest.raises(PerfectFit):
            bic_tilde(data, np.array([4.0]), 1e-300)
