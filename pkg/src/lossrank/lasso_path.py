"""LARS-lasso homotopy for ``||y - X b||^2 + lam * sum(|b_j|)``.

With this parameterization (no 1/2 in front of the squared error) the
stationarity conditions read ``2 x_j'(y - X b) = lam * sign(b_j)`` on the
active set and ``|2 x_j'(y - X b)| <= lam`` elsewhere, so the path starts at
``lam_max = 2 max_j |x_j'y|``.

Along a segment with active set A and signs s the solution is
``b_A(lam) = G_A^{-1} (X_A'y - lam/2 s)``, i.e. affine in lam.  The Cholesky
factor of ``G_A = X_A'X_A`` is updated column by column as variables enter
and leave; it is rebuilt from scratch when the solve drifts.
"""

from __future__ import annotations

import bisect
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import (
    DegenerateDesign,
    NoCandidates,
    NoProgress,
    RankDeficient,
)
from .linreg_core import OlsFit, StandardizedDataset, ols_fit

TIE_TOL = 1e-12
DRIFT_TOL = 1e-8
REENTRY_TOL = 1e-9


@dataclass(frozen=True)
class PathSegment:
    """Piece of the path on ``(lambda_lo, lambda_hi]`` with a fixed active set.

    ``event`` records how the active set was obtained at ``lambda_hi``:
    ``("add", j)`` or ``("drop", j)``.
    """

    lambda_hi: float
    lambda_lo: float
    active: tuple
    beta_hi: np.ndarray
    beta_lo: np.ndarray
    event: tuple = ()

    def at(self, lam: float) -> np.ndarray:
        span = self.lambda_hi - self.lambda_lo
        if span <= 0:
            return self.beta_lo.copy()
        w = (lam - self.lambda_lo) / span
        return self.beta_lo + w * (self.beta_hi - self.beta_lo)


@dataclass(frozen=True)
class LassoPath:
    segments: tuple
    lambda_max: float
    n: int
    d: int
    # why the homotopy stopped: "zero" (reached lam = 0), "saturated",
    # "max_steps", "perfect_fit" or "null" (y orthogonal to every column)
    stop_reason: str = "zero"

    @property
    def lambda_min(self) -> float:
        return self.segments[-1].lambda_lo if self.segments else 0.0

    @property
    def breakpoints(self) -> np.ndarray:
        if not self.segments:
            return np.array([])
        return np.array([s.lambda_hi for s in self.segments] + [self.lambda_min])

    def active_size(self) -> np.ndarray:
        return np.array([len(s.active) for s in self.segments], dtype=int)


@dataclass(frozen=True)
class CandidateModel:
    subset: tuple
    lambda_interval: tuple
    df: int
    fit: Optional[OlsFit]
    # every (lo, hi] interval on which the path visits this subset
    intervals: tuple = field(default=())


def _cholesky_append(R, G_col, diag_sq):
    """Extend upper-triangular ``R`` (R'R = G) by one column."""
    k = R.shape[0]
    if k == 0:
        if diag_sq <= 0:
            raise DegenerateDesign("zero column entered the active set")
        return np.array([[np.sqrt(diag_sq)]])
    r = solve_triangular(R, G_col, trans="T")
    rkk = diag_sq - r @ r
    if rkk <= 1e-12 * diag_sq:
        raise DegenerateDesign("entering column is collinear with the active set")
    out = np.zeros((k + 1, k + 1))
    out[:k, :k] = R
    out[:k, k] = r
    out[k, k] = np.sqrt(rkk)
    return out


def _cholesky_delete(R, pos):
    """Remove column ``pos`` from the factor using Givens rotations."""
    H = np.delete(R, pos, axis=1)
    k = H.shape[1]
    for i in range(pos, k):
        a, b = H[i, i], H[i + 1, i]
        r = np.hypot(a, b)
        if r == 0:
            continue
        c, s = a / r, b / r
        rows = H[[i, i + 1], i:]
        H[i, i:] = c * rows[0] + s * rows[1]
        H[i + 1, i:] = -s * rows[0] + c * rows[1]
    R2 = np.triu(H[:k, :])
    # keep a positive diagonal so R'R stays the Gram matrix with the usual sign
    sgn = np.sign(np.diag(R2))
    sgn[sgn == 0] = 1.0
    return R2 * sgn[:, None]


def default_max_steps(n: int, d: int) -> int:
    return 8 * max(1, min(d, n - 1))


def compute_lars_path(data: StandardizedDataset, max_steps: Optional[int] = None) -> LassoPath:
    """Trace the lasso solution path from ``lam_max`` down towards zero.

    Stops when lam reaches 0, when the residual correlations vanish, after
    the active set saturates at ``min(d, n - 1)`` and its segment ends, or
    after ``max_steps`` segments.
    """
    X, y = data.Xs, data.ys
    n, d = X.shape
    if max_steps is None:
        max_steps = default_max_steps(n, d)
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    corr = X.T @ y
    cmax = float(np.max(np.abs(corr)))
    scale = float(np.sqrt(y @ y)) * float(np.sqrt(np.max(np.sum(X * X, axis=0))))
    if cmax <= 1e-13 * max(scale, 1e-300) or scale == 0.0:
        return LassoPath((), 0.0 if cmax == 0 else 2.0 * cmax, n, d, "null")
    lam = 2.0 * cmax
    lam_max = lam
    max_active = min(d, n - 1)
    col_sq = np.sum(X * X, axis=0)

    # lowest index among (near) ties enters first
    j0 = int(np.flatnonzero(np.abs(corr) >= cmax * (1 - TIE_TOL))[0])
    active = [j0]
    signs = [float(np.sign(corr[j0]))]
    R = _cholesky_append(np.zeros((0, 0)), None, col_sq[j0])
    beta = np.zeros(d)
    segments = []
    event = ("add", j0)
    just_dropped = None
    stop = "zero"

    while True:
        if len(segments) >= max_steps:
            stop = "max_steps"
            break
        A = np.array(active)
        s = np.array(signs)
        w = cho_solve((R, False), s)
        u = X[:, A] @ w
        a = X.T @ u
        if np.max(np.abs(a[A] - s)) > DRIFT_TOL:
            G = X[:, A].T @ X[:, A]
            try:
                R = np.linalg.cholesky(G).T
            except np.linalg.LinAlgError as exc:
                raise DegenerateDesign("active Gram matrix lost definiteness") from exc
            w = cho_solve((R, False), s)
            u = X[:, A] @ w
            a = X.T @ u

        # as lam decreases by t: beta_A += t/2 * w,  corr -= t/2 * a
        t_best = lam
        kind, who = "zero", None

        bA = beta[A]
        with np.errstate(divide="ignore", invalid="ignore"):
            t_drop = np.where(bA * w < 0, -2.0 * bA / w, np.inf)
        if t_drop.size and np.min(t_drop) < t_best:
            pos = int(np.argmin(t_drop))
            t_best, kind, who = float(t_drop[pos]), "drop", pos

        saturated = len(active) >= max_active
        inactive = np.ones(d, dtype=bool)
        inactive[A] = False
        if inactive.any():
            idx = np.flatnonzero(inactive)
            cj, aj = corr[idx], a[idx]
            with np.errstate(divide="ignore", invalid="ignore"):
                t_pos = np.where(1 - aj > 1e-15, (lam - 2 * cj) / (1 - aj), np.inf)
                t_neg = np.where(1 + aj > 1e-15, (lam + 2 * cj) / (1 + aj), np.inf)
            t_enter = np.minimum(t_pos, t_neg)
            t_enter = np.where(t_enter > -TIE_TOL * lam, np.maximum(t_enter, 0.0), np.inf)
            if just_dropped is not None:
                # a dropped index sits on the boundary; it may re-enter later but not at once
                k = np.flatnonzero(idx == just_dropped)
                if k.size and t_enter[k[0]] <= REENTRY_TOL * lam:
                    t_enter[k[0]] = np.inf
            if t_enter.size:
                tmin = float(np.min(t_enter))
                if tmin < t_best - TIE_TOL * lam or (kind == "zero" and tmin <= t_best):
                    j = int(idx[np.flatnonzero(t_enter <= tmin + TIE_TOL * lam)[0]])
                    t_best, kind, who = tmin, "add", j

        if t_best < -TIE_TOL * lam_max:
            raise NoProgress(f"negative step {t_best:g} at lambda={lam:g}")
        t_best = max(t_best, 0.0)
        lam_lo = max(lam - t_best, 0.0)
        beta_lo = beta.copy()
        beta_lo[A] = bA + 0.5 * t_best * w
        if kind == "drop":
            beta_lo[A[who]] = 0.0
        if t_best > 0:
            segments.append(
                PathSegment(lam, lam_lo, tuple(sorted(active)), beta.copy(), beta_lo.copy(), event)
            )
        elif not segments or segments[-1].active != tuple(sorted(active)):
            # zero-length piece: record only the event for the next segment
            pass
        beta = beta_lo
        lam = lam_lo
        corr = X.T @ (y - X @ beta)

        if kind == "zero" or lam <= 0.0:
            stop = "zero"
            break
        if saturated and kind == "add":
            stop = "saturated"
            break
        if float(np.max(np.abs(corr))) <= 1e-13 * scale:
            stop = "perfect_fit"
            break

        if kind == "drop":
            j = active.pop(who)
            signs.pop(who)
            R = _cholesky_delete(R, who)
            event = ("drop", j)
            just_dropped = j
        else:
            G_col = X[:, active].T @ X[:, who]
            R = _cholesky_append(R, G_col, col_sq[who])
            active.append(who)
            signs.append(float(np.sign(corr[who])) or 1.0)
            event = ("add", who)
            just_dropped = None

    return LassoPath(tuple(segments), lam_max, n, d, stop)


def coefficients_at(path: LassoPath, lam: float) -> np.ndarray:
    """Lasso coefficients at ``lam`` by interpolating inside the path.

    Values of ``lam`` below the end of a truncated path return the last
    computed solution.
    """
    if lam >= path.lambda_max or not path.segments:
        return np.zeros(path.d)
    his = [-s.lambda_hi for s in path.segments]
    # first segment whose lambda_lo < lam
    k = bisect.bisect_left(his, -lam)
    k = max(0, k - 1)
    while k < len(path.segments) and path.segments[k].lambda_lo >= lam:
        k += 1
    if k >= len(path.segments):
        return path.segments[-1].beta_lo.copy()
    return path.segments[k].at(lam)


def lasso_objective(data: StandardizedDataset, beta: np.ndarray, lam: float) -> float:
    r = data.ys - data.Xs @ beta
    return float(r @ r + lam * np.sum(np.abs(beta)))


def kkt_violation(data: StandardizedDataset, beta: np.ndarray, lam: float, active=None):
    """Return ``(inactive_excess, active_gap)`` for the stationarity conditions.

    ``inactive_excess`` is ``max(|2 x_j'r|) - lam`` over inactive j and
    ``active_gap`` is ``max |2 x_j'r - lam sign(b_j)|`` over active j.
    """
    g = 2.0 * data.Xs.T @ (data.ys - data.Xs @ beta)
    if active is None:
        active = np.flatnonzero(beta != 0)
    active = np.asarray(active, dtype=int)
    mask = np.ones(beta.shape[0], dtype=bool)
    mask[active] = False
    inactive_excess = float(np.max(np.abs(g[mask])) - lam) if mask.any() else -np.inf
    nz = active[beta[active] != 0]
    active_gap = float(np.max(np.abs(g[nz] - lam * np.sign(beta[nz])))) if nz.size else 0.0
    return inactive_excess, active_gap


def _collect_candidates(path: LassoPath, data: StandardizedDataset):
    order = []
    intervals = {}
    for seg in path.segments:
        if seg.active not in intervals:
            order.append(seg.active)
            intervals[seg.active] = []
        intervals[seg.active].append((seg.lambda_lo, seg.lambda_hi))
    excluded = Counter()
    if not path.segments:
        excluded["empty"] += 1
    out = []
    for S in order:
        if len(S) == 0:
            excluded["empty"] += 1
            continue
        if len(S) > data.n - 1:
            excluded["df_exceeds_n"] += 1
            continue
        try:
            fit = ols_fit(data, S)
        except RankDeficient:
            excluded["rank_deficient"] += 1
            continue
        ivs = tuple(intervals[S])
        out.append(CandidateModel(S, ivs[0], len(S), fit, ivs))
    return out, excluded


def candidate_subsets(path: LassoPath, data: StandardizedDataset):
    """Distinct nonempty active sets along the path, in order of appearance.

    Sets with more than n - 1 members or a rank-deficient design are left
    out, as is the empty set (it has no refit and rho = 1).

    Raises
    ------
    NoCandidates
        If nothing survives the filters.
    """
    out, excluded = _collect_candidates(path, data)
    if not out:
        raise NoCandidates(f"no usable candidate subsets (excluded: {dict(excluded)})")
    return out
