"""Closed-form model-selection criteria.

Loss rank and BIC score a subset through its least-squares refit (``rho``,
``df``, ``sigma2_hat``); GCV and BIC-tilde score the lasso estimate itself at
a given penalty.  Natural logarithms throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, solve_triangular
from scipy.special import rel_entr

from .errors import (
    AllZeroCoefficients,
    DegreesOfFreedomOverflow,
    DomainError,
    Infeasible,
    PerfectFit,
)
from .linreg_core import StandardizedDataset, squared_norm

# relative RSS below which a refit counts as exact
RHO_ZERO = 1e-12


class Criterion(str, Enum):
    LR = "LR"
    BIC = "BIC"
    GCV = "GCV"
    BIC_TILDE = "BIC_TILDE"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, tag) -> "Criterion":
        if isinstance(tag, Criterion):
            return tag
        key = str(tag).strip().upper().replace("-", "_")
        aliases = {"BICT": "BIC_TILDE", "BIC~": "BIC_TILDE", "BICTILDE": "BIC_TILDE", "LOSSRANK": "LR"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown criterion {tag!r}") from None


ALL_CRITERIA = (Criterion.LR, Criterion.BIC, Criterion.GCV, Criterion.BIC_TILDE)
REFIT_CRITERIA = (Criterion.LR, Criterion.BIC)
LASSO_CRITERIA = (Criterion.GCV, Criterion.BIC_TILDE)


@dataclass(frozen=True)
class CriterionInput:
    n: int
    y_sq_norm: float
    rho: float
    df: int

    @property
    def p(self) -> float:
        return self.df / self.n


@dataclass(frozen=True)
class CriterionScore:
    criterion: Criterion
    value: float
    feasible: bool


def _check_open_unit(x, name):
    if not (0.0 < x < 1.0):
        raise DomainError(f"{name}={x!r} must lie strictly inside (0, 1)")


def kl_bernoulli(p: float, q: float) -> float:
    """KL divergence between Bernoulli(p) and Bernoulli(q)."""
    _check_open_unit(p, "p")
    _check_open_unit(q, "q")
    return float(rel_entr(p, q) + rel_entr(1.0 - p, 1.0 - q))


def entropy(p: float) -> float:
    _check_open_unit(p, "p")
    return float(-p * math.log(p) - (1.0 - p) * math.log1p(-p))


def is_feasible(inp: CriterionInput) -> bool:
    return inp.n * (1.0 - inp.rho) > inp.df


def alpha_star(inp: CriterionInput) -> float:
    """Minimizer of :func:`loss_rank_alpha` over alpha > 0.

    Setting the alpha-derivative to zero leaves the linear equation
    ``alpha (n (1 - rho) - df) = rho df``.
    """
    denom = inp.n * (1.0 - inp.rho) - inp.df
    if not denom > 0:
        raise Infeasible(f"n(1-rho)={inp.n * (1 - inp.rho):g} <= df={inp.df}")
    return inp.rho * inp.df / denom


def loss_rank_alpha(inp: CriterionInput, alpha: float) -> float:
    """Loss rank of a projection model with rank-regularizer ``alpha``."""
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    n, df = inp.n, inp.df
    return (
        0.5 * n * math.log(inp.y_sq_norm)
        + 0.5 * n * math.log(inp.rho + alpha)
        - 0.5 * df * math.log(alpha)
        - 0.5 * (n - df) * math.log1p(alpha)
    )


def loss_rank(inp: CriterionInput) -> CriterionScore:
    """Loss rank minimized over alpha, in its KL form.

    Infeasible inputs (``n (1 - rho) <= df``) score +inf.  An exact refit
    (``rho <= RHO_ZERO``) scores -inf, the limit of the closed form as rho
    goes to 0; selection breaks those ties by smallest df.
    """
    if not is_feasible(inp):
        return CriterionScore(Criterion.LR, math.inf, False)
    if inp.rho <= RHO_ZERO:
        return CriterionScore(Criterion.LR, -math.inf, True)
    value = 0.5 * inp.n * math.log(inp.y_sq_norm) - 0.5 * inp.n * kl_bernoulli(inp.p, 1.0 - inp.rho)
    return CriterionScore(Criterion.LR, value, True)


def loss_rank_entropy_form(inp: CriterionInput) -> float:
    """Same quantity as :func:`loss_rank` written with the binary entropy."""
    if not is_feasible(inp):
        raise Infeasible("n(1-rho) <= df")
    n, df, rho = inp.n, inp.df, inp.rho
    return (
        0.5 * n * math.log(rho * inp.y_sq_norm)
        + 0.5 * n * entropy(df / n)
        + 0.5 * df * math.log((1.0 - rho) / rho)
    )


def bic(n: int, sigma2_hat: float, df: int) -> float:
    if not sigma2_hat > 0:
        raise DomainError("sigma2_hat must be positive")
    return 0.5 * n * math.log(sigma2_hat) + 0.5 * df * math.log(n)


def bic_score(n: int, sigma2_hat: float, df: int) -> CriterionScore:
    """BIC wrapped as a score; an exact fit is -inf and not eligible."""
    if not sigma2_hat > 0:
        return CriterionScore(Criterion.BIC, -math.inf, False)
    return CriterionScore(Criterion.BIC, bic(n, sigma2_hat, df), True)


def default_ridge_scale(n: int) -> float:
    """Multiplier on lambda in the degrees-of-freedom ridge system.

    ``sqrt(n - 1)`` measures lambda on unit-norm columns while the Gram
    matrix and the weights stay on the unit-variance scale.  A value of 0.5
    would make the ridge system reproduce the lasso coefficients exactly.
    """
    return math.sqrt(n - 1)


def lasso_df_from_gram(G_A: np.ndarray, abs_beta_A: np.ndarray, ridge: float) -> float:
    """``trace[(G_A + ridge * diag(1/|b_A|))^{-1} G_A]``.

    Written as ``k - ridge * sum_j [M^{-1}]_jj / |b_j|`` so only the diagonal
    of the inverse is needed.
    """
    k = G_A.shape[0]
    if k == 0:
        return 0.0
    winv = 1.0 / abs_beta_A
    M = G_A + np.diag(ridge * winv)
    try:
        c, _ = cho_factor(M, lower=True, check_finite=False)
    except LinAlgError:
        return float(np.trace(np.linalg.pinv(M) @ G_A))
    Linv = solve_triangular(np.tril(c), np.eye(k), lower=True, check_finite=False)
    diag_inv = np.sum(Linv * Linv, axis=0)
    return float(k - ridge * np.sum(diag_inv * winv))


def lasso_df(data: StandardizedDataset, beta_lambda: np.ndarray, lam: float, ridge_scale=None) -> float:
    beta_lambda = np.asarray(beta_lambda, dtype=float)
    A = np.flatnonzero(beta_lambda)
    if A.size == 0:
        raise AllZeroCoefficients("lasso estimate is identically zero")
    if ridge_scale is None:
        ridge_scale = default_ridge_scale(data.n)
    XA = data.Xs[:, A]
    return lasso_df_from_gram(XA.T @ XA, np.abs(beta_lambda[A]), ridge_scale * lam)


def _lasso_rss(data, beta_lambda):
    return squared_norm(data.ys - data.Xs @ np.asarray(beta_lambda, dtype=float))


def gcv_lasso(data: StandardizedDataset, beta_lambda, lam: float, ridge_scale=None) -> float:
    """Generalized cross-validation score of the lasso fit at ``lam``."""
    n = data.n
    DF = lasso_df(data, beta_lambda, lam, ridge_scale)
    if DF >= n:
        raise DegreesOfFreedomOverflow(f"DF={DF:g} >= n={n}")
    return gcv_value(n, _lasso_rss(data, beta_lambda), DF)


def bic_tilde(data: StandardizedDataset, beta_lambda, lam: float, ridge_scale=None) -> float:
    n = data.n
    DF = lasso_df(data, beta_lambda, lam, ridge_scale)
    if DF >= n:
        raise DegreesOfFreedomOverflow(f"DF={DF:g} >= n={n}")
    rss = _lasso_rss(data, beta_lambda)
    if rss <= 0:
        raise PerfectFit("lasso residual is exactly zero")
    return bic_tilde_value(n, rss, DF)


def gcv_value(n, rss, DF):
    return (rss / n) / (1.0 - DF / n) ** 2


def bic_tilde_value(n, rss, DF):
    return math.log(rss / n) + DF * math.log(n) / n


def refit_input(n: int, y_sq_norm: float, fit) -> CriterionInput:
    return CriterionInput(n, y_sq_norm, fit.rho, fit.df)
