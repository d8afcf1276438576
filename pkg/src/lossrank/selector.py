"""Pick a subset from the lasso path under each requested criterion."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .criteria import (
    ALL_CRITERIA,
    LASSO_CRITERIA,
    Criterion,
    CriterionScore,
    bic_score,
    bic_tilde_value,
    default_ridge_scale,
    gcv_value,
    lasso_df_from_gram,
    loss_rank,
    refit_input,
)
from .errors import AllInfeasible, NoCandidates
from .lasso_path import (
    CandidateModel,
    LassoPath,
    _collect_candidates,
    coefficients_at,
    compute_lars_path,
)
from .linreg_core import Dataset, OlsFit, StandardizedDataset, standardize

SCORE_TIE_TOL = 1e-9
DEFAULT_GRID_COUNT = 1000
DEFAULT_GRID_SPAN = 1e-4


class Fit(str, Enum):
    UNDERFITTED = "Underfitted"
    CORRECT = "Correct"
    OVERFITTED = "Overfitted"

    def __str__(self):
        return self.value


def classify_fit(selected: Iterable[int], truth: Iterable[int]) -> Fit:
    sel, tru = set(selected), set(truth)
    if not tru:
        raise ValueError("true support must be nonempty")
    if sel == tru:
        return Fit.CORRECT
    if sel > tru:
        return Fit.OVERFITTED
    return Fit.UNDERFITTED


@dataclass(frozen=True)
class GridTrace:
    """Criterion curves on a lambda grid (decreasing lambda order)."""

    lambdas: np.ndarray
    active_size: np.ndarray
    candidate_index: np.ndarray  # -1 where the active set is not a candidate
    gcv: np.ndarray
    bic_tilde: np.ndarray
    dof: np.ndarray


@dataclass(frozen=True)
class Choice:
    criterion: Criterion
    subset: tuple
    names: tuple
    score: float
    plateau: tuple  # merged (lo, hi] intervals on which the path yields the subset
    fit: OlsFit
    intercept: float
    coef_raw: np.ndarray
    lambda_opt: Optional[float] = None  # grid minimizer for GCV / BIC-tilde

    @property
    def lambda_interval(self) -> tuple:
        return (min(lo for lo, _ in self.plateau), max(hi for _, hi in self.plateau))


@dataclass(frozen=True)
class SelectionReport:
    data: StandardizedDataset
    path: LassoPath
    candidates: List[CandidateModel]
    scores: Dict[Criterion, List[CriterionScore]]
    chosen: Dict[Criterion, Choice]
    diagnostics: Dict[str, int] = field(default_factory=dict)
    grid: Optional[GridTrace] = None
    unavailable: tuple = ()  # criteria skipped because no candidate was eligible


def lambda_grid(lambda_max: float, count: int = DEFAULT_GRID_COUNT, span: float = DEFAULT_GRID_SPAN):
    """``count`` log-spaced values from ``lambda_max`` down to ``lambda_max * span``."""
    if count < 2:
        raise ValueError("grid needs at least two points")
    return np.geomspace(lambda_max, lambda_max * span, count)


def _merge_intervals(intervals):
    ivs = sorted(intervals)
    out = []
    for lo, hi in ivs:
        if out and lo <= out[-1][1] * (1 + 1e-12):
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return tuple(out)


def _argbest(values: Sequence[float], candidates: Sequence[CandidateModel], eligible):
    """Index of the smallest eligible score, ties by df then subset."""
    idx = [i for i in range(len(values)) if eligible[i]]
    if not idx:
        return None
    best = min(values[i] for i in idx)
    if math.isinf(best):
        tied = [i for i in idx if values[i] == best]
    else:
        tol = SCORE_TIE_TOL * max(1.0, abs(best))
        tied = [i for i in idx if values[i] - best <= tol]
    return min(tied, key=lambda i: (candidates[i].df, candidates[i].subset))


def evaluate_grid(data, path, candidates, lambdas, ridge_scale=None) -> GridTrace:
    """GCV and BIC-tilde of the lasso estimate at each grid value."""
    n = data.n
    X, y = data.Xs, data.ys
    if ridge_scale is None:
        ridge_scale = default_ridge_scale(n)
    lookup = {c.subset: i for i, c in enumerate(candidates)}
    G = X.T @ X
    m = len(lambdas)
    gcv = np.full(m, np.inf)
    bict = np.full(m, np.inf)
    dof = np.full(m, np.nan)
    size = np.zeros(m, dtype=int)
    cidx = np.full(m, -1, dtype=int)
    for k, lam in enumerate(lambdas):
        b = coefficients_at(path, lam)
        A = np.flatnonzero(b)
        size[k] = A.size
        if A.size == 0:
            continue
        cidx[k] = lookup.get(tuple(int(j) for j in A), -1)
        DF = lasso_df_from_gram(G[np.ix_(A, A)], np.abs(b[A]), ridge_scale * lam)
        dof[k] = DF
        if not DF < n:
            continue
        r = y - X[:, A] @ b[A]
        rss = float(r @ r)
        gcv[k] = gcv_value(n, rss, DF)
        if rss > 0:
            bict[k] = bic_tilde_value(n, rss, DF)
    return GridTrace(np.asarray(lambdas, dtype=float), size, cidx, gcv, bict, dof)


def _refit_scores(data, candidates, crit):
    n, yy = data.n, data.y_sq_norm
    out = []
    for c in candidates:
        if crit is Criterion.LR:
            # centering leaves n - 1 residual dimensions, so df >= n - 1
            # interpolates any response and is never a meaningful exact fit
            if c.df >= n - 1:
                out.append(CriterionScore(Criterion.LR, math.inf, False))
            else:
                out.append(loss_rank(refit_input(n, yy, c.fit)))
        else:
            out.append(bic_score(n, c.fit.sigma2_hat, c.df))
    return out


def _grid_scores(candidates, trace: GridTrace, crit):
    curve = trace.gcv if crit is Criterion.GCV else trace.bic_tilde
    vals = np.full(len(candidates), np.inf)
    at = [None] * len(candidates)
    for k, i in enumerate(trace.candidate_index):
        if i >= 0 and curve[k] < vals[i]:
            vals[i] = curve[k]
            at[i] = float(trace.lambdas[k])
    scores = [CriterionScore(crit, float(v), bool(np.isfinite(v))) for v in vals]
    return scores, at


def select(
    dataset: Dataset,
    criteria: Iterable = ALL_CRITERIA,
    *,
    grid_count: int = DEFAULT_GRID_COUNT,
    grid_span: float = DEFAULT_GRID_SPAN,
    ridge_scale: Optional[float] = None,
    max_steps: Optional[int] = None,
    skip_infeasible: bool = False,
    lambdas: Optional[Sequence[float]] = None,
) -> SelectionReport:
    """Standardize, trace the lasso path and choose one subset per criterion.

    LR and BIC score each distinct active set through its least-squares
    refit.  GCV and BIC-tilde are continuous in lambda and are minimized over
    a log-spaced lambda grid; a grid point counts for the candidate whose
    subset equals the active set there.  ``lambdas`` overrides the default
    grid of ``grid_count`` values spanning ``[lambda_max * grid_span, lambda_max]``.

    Raises
    ------
    NoCandidates
        If the path yields no usable subset.
    AllInfeasible
        If every candidate is ineligible under one of the criteria.  With
        ``skip_infeasible`` such criteria are listed in
        ``SelectionReport.unavailable`` instead, and the error is raised only
        when no criterion at all could choose.
    """
    crits = tuple(dict.fromkeys(Criterion.parse(c) for c in criteria))
    if not crits:
        raise ValueError("at least one criterion is required")
    data = dataset if isinstance(dataset, StandardizedDataset) else standardize(dataset)
    path = compute_lars_path(data, max_steps)
    candidates, excluded = _collect_candidates(path, data)
    if not candidates:
        raise NoCandidates(f"no usable candidate subsets (excluded: {dict(excluded)})")

    trace = None
    if any(c in LASSO_CRITERIA for c in crits):
        if lambdas is None:
            lambdas = lambda_grid(path.lambda_max, grid_count, grid_span)
        else:
            lambdas = np.sort(np.asarray(lambdas, dtype=float))[::-1]
            if lambdas.size < 2 or not lambdas[-1] > 0:
                raise ValueError("lambda grid needs at least two positive values")
        trace = evaluate_grid(data, path, candidates, lambdas, ridge_scale)

    scores, chosen, unavailable = {}, {}, []
    for crit in crits:
        lam_at = [None] * len(candidates)
        if crit in LASSO_CRITERIA:
            sc, lam_at = _grid_scores(candidates, trace, crit)
        else:
            sc = _refit_scores(data, candidates, crit)
        scores[crit] = sc
        vals = [s.value for s in sc]
        i = _argbest(vals, candidates, [s.feasible for s in sc])
        if i is None:
            if not skip_infeasible:
                raise AllInfeasible(str(crit))
            unavailable.append(crit)
            continue
        cand = candidates[i]
        intercept, coef = data.to_raw(cand.subset, cand.fit.beta)
        chosen[crit] = Choice(
            crit,
            cand.subset,
            tuple(data.names[j] for j in cand.subset),
            vals[i],
            _merge_intervals(cand.intervals),
            cand.fit,
            intercept,
            coef,
            lam_at[i],
        )
    if not chosen:
        raise AllInfeasible(", ".join(str(c) for c in unavailable))
    diagnostics = {"n_candidates": len(candidates), "n_segments": len(path.segments)}
    diagnostics.update({f"excluded_{k}": v for k, v in excluded.items()})
    return SelectionReport(data, path, candidates, scores, chosen, diagnostics, trace, tuple(unavailable))

