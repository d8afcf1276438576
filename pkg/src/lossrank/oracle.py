"""Brute-force reference implementations used to cross-check the fast paths.

None of these are meant to be quick: exhaustive subset search is 2^d, the
coordinate-descent lasso runs to a tight tolerance, and the loss-rank
infimum is taken over a million-point alpha grid.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .criteria import Criterion, CriterionInput, bic_score, is_feasible, loss_rank, refit_input
from .errors import DimensionTooLarge, DomainError, Infeasible, NoConvergence, RankDeficient
from .linreg_core import StandardizedDataset, ols_fit

MAX_ENUMERATION_DIM = 20


@dataclass(frozen=True)
class OracleConfig:
    max_subset_dim: int = 12
    cd_tol: float = 1e-10
    cd_max_iters: int = 10**6
    alpha_grid: tuple = (-8.0, 8.0, 10**6)

    def __post_init__(self):
        if self.max_subset_dim > MAX_ENUMERATION_DIM:
            raise ValueError(f"max_subset_dim must be <= {MAX_ENUMERATION_DIM}")


@dataclass(frozen=True)
class ExhaustiveResult:
    subset: tuple
    score: float
    visited: int


def best_subset_exhaustive(data: StandardizedDataset, criterion, cfg: OracleConfig = OracleConfig()):
    """Minimize LR or BIC over every nonempty subset of the columns.

    Rank-deficient and ineligible subsets are skipped; ties are broken by
    smaller size, then lexicographic order.  Returns an
    :class:`ExhaustiveResult` whose ``visited`` counts the subsets examined.
    """
    crit = Criterion.parse(criterion)
    if crit not in (Criterion.LR, Criterion.BIC):
        raise ValueError("exhaustive search supports LR and BIC only")
    d, n = data.d, data.n
    if d > cfg.max_subset_dim:
        raise DimensionTooLarge(f"d={d} exceeds max_subset_dim={cfg.max_subset_dim}")
    yy = data.y_sq_norm
    best = None
    visited = 0
    for k in range(1, d + 1):
        for S in itertools.combinations(range(d), k):
            visited += 1
            try:
                fit = ols_fit(data, S)
            except RankDeficient:
                continue
            if crit is Criterion.LR:
                sc = loss_rank(refit_input(n, yy, fit))
            else:
                sc = bic_score(n, fit.sigma2_hat, fit.df)
            if not sc.feasible:
                continue
            key = (sc.value, k, S)
            if best is None or _better(key, best):
                best = key
    if best is None:
        return ExhaustiveResult((), math.inf, visited)
    return ExhaustiveResult(best[2], best[0], visited)


def _better(a, b, tol=1e-9):
    va, vb = a[0], b[0]
    if va == vb or (math.isfinite(va) and math.isfinite(vb) and abs(va - vb) <= tol * max(1.0, abs(vb))):
        return a[1:] < b[1:]
    return va < vb


def _soft(z, t):
    return math.copysign(max(abs(z) - t, 0.0), z)


def lasso_fixed_lambda_cd(data: StandardizedDataset, lam: float, cfg: OracleConfig = OracleConfig()):
    """Cyclic coordinate descent on ``||y - X b||^2 + lam * sum|b_j|``."""
    if not lam > 0:
        raise DomainError("lambda must be positive")
    X = np.asarray(data.Xs, dtype=float)
    y = np.asarray(data.ys, dtype=float)
    n, d = X.shape
    col_sq = np.einsum("ij,ij->j", X, X)
    beta = np.zeros(d)
    r = y.copy()
    for _ in range(cfg.cd_max_iters):
        max_change = 0.0
        for j in range(d):
            if col_sq[j] == 0:
                continue
            old = beta[j]
            z = X[:, j] @ r + col_sq[j] * old
            new = _soft(z, lam / 2.0) / col_sq[j]
            if new != old:
                r -= X[:, j] * (new - old)
                beta[j] = new
                max_change = max(max_change, abs(new - old))
        if max_change < cfg.cd_tol:
            return beta
    raise NoConvergence(f"coordinate descent did not converge in {cfg.cd_max_iters} sweeps")


def loss_rank_alpha_curve(inp: CriterionInput, alphas: np.ndarray) -> np.ndarray:
    n, df = inp.n, inp.df
    return (
        0.5 * n * np.log(inp.y_sq_norm)
        + 0.5 * n * np.log(inp.rho + alphas)
        - 0.5 * df * np.log(alphas)
        - 0.5 * (n - df) * np.log1p(alphas)
    )


def loss_rank_grid_min(inp: CriterionInput, cfg: OracleConfig = OracleConfig(), return_alpha=False):
    """Infimum of the alpha-regularized loss rank over a log-spaced grid."""
    if not is_feasible(inp):
        raise Infeasible("n(1-rho) <= df")
    lo, hi, count = cfg.alpha_grid
    alphas = np.logspace(lo, hi, int(count))
    vals = loss_rank_alpha_curve(inp, alphas)
    k = int(np.argmin(vals))
    if return_alpha:
        return float(vals[k]), float(alphas[k]), k
    return float(vals[k])
