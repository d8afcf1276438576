"""Dense least-squares primitives and data standardization.

Everything downstream works on a centered response and a design whose
columns are centered and scaled to unit sample standard deviation
(divisor n - 1), so no intercept is ever fitted explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    ConstantColumn,
    DataError,
    EmptySubset,
    NonFiniteInput,
    RankDeficient,
)

RANK_TOL = 1e-10


@dataclass(frozen=True)
class Dataset:
    """Raw covariates ``X`` (n x d), response ``y`` and optional column names."""

    X: np.ndarray
    y: np.ndarray
    names: Optional[tuple] = None

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float).ravel()
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise DataError("X must be a 2-d array")
        n, d = X.shape
        if n < 2 or d < 1:
            raise DataError(f"need n >= 2 and d >= 1, got n={n}, d={d}")
        if y.shape[0] != n:
            raise DataError(f"X has {n} rows but y has {y.shape[0]}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise NonFiniteInput("X and y must be finite")
        names = self.names
        if names is None:
            names = tuple(f"x{j + 1}" for j in range(d))
        else:
            names = tuple(str(s) for s in names)
            if len(names) != d:
                raise DataError(f"{len(names)} names for {d} columns")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class StandardizedDataset:
    """Centered response and centered, unit-variance design.

    ``col_means``, ``col_scales`` and ``y_mean`` are kept so coefficients can
    be mapped back to the raw scale with :meth:`to_raw`.
    """

    Xs: np.ndarray
    ys: np.ndarray
    col_means: np.ndarray
    col_scales: np.ndarray
    y_mean: float
    names: tuple

    @property
    def n(self) -> int:
        return self.Xs.shape[0]

    @property
    def d(self) -> int:
        return self.Xs.shape[1]

    @property
    def y_sq_norm(self) -> float:
        return squared_norm(self.ys)

    def to_raw(self, subset: Sequence[int], beta: np.ndarray):
        """Map standardized coefficients on ``subset`` to ``(intercept, coef)``.

        ``coef`` has length d with zeros off the subset.
        """
        coef = np.zeros(self.d)
        idx = np.asarray(subset, dtype=int)
        coef[idx] = np.asarray(beta, dtype=float) / self.col_scales[idx]
        intercept = self.y_mean - float(self.col_means @ coef)
        return intercept, coef

    def scaled(self, c: float) -> "StandardizedDataset":
        """Same design with the response multiplied by ``c``."""
        return StandardizedDataset(
            self.Xs, self.ys * c, self.col_means, self.col_scales,
            self.y_mean * c, self.names,
        )


@dataclass(frozen=True)
class OlsFit:
    subset: tuple
    beta: np.ndarray
    sigma2_hat: float
    rho: float
    df: int
    rss: float


def squared_norm(v) -> float:
    v = np.asarray(v, dtype=float).ravel()
    return float(v @ v)


def standardize(dataset: Dataset) -> StandardizedDataset:
    """Center ``y`` and center/scale every column of ``X`` to unit sample sd.

    Raises
    ------
    ConstantColumn
        If a column has zero sample variance (index is 0-based).
    """
    X, y = dataset.X, dataset.y
    means = X.mean(axis=0)
    Xc = X - means
    scales = Xc.std(axis=0, ddof=1)
    for j, s in enumerate(scales):
        # relative test so columns like 1e8 + tiny noise are still caught
        if not s > 1e-12 * max(1.0, abs(means[j])):
            raise ConstantColumn(j)
    Xs = Xc / scales
    y_mean = float(y.mean())
    ys = y - y_mean
    Xs.setflags(write=False)
    ys.setflags(write=False)
    return StandardizedDataset(Xs, ys, means, scales, y_mean, dataset.names)


def ols_fit(data: StandardizedDataset, subset: Sequence[int]) -> OlsFit:
    """Least-squares refit of ``ys`` on the columns in ``subset``.

    The solve goes through a thin QR factorization; a subset is declared
    rank deficient when the smallest singular value of its columns is below
    ``RANK_TOL`` times the largest.
    """
    S = tuple(int(j) for j in subset)
    if not S:
        raise EmptySubset("cannot fit an empty subset")
    XS = data.Xs[:, S]
    y = data.ys
    n = data.n
    if len(S) > n - 1:
        raise RankDeficient(S)
    Q, R = np.linalg.qr(XS, mode="reduced")
    sv = np.linalg.svd(R, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] < RANK_TOL * sv[0]:
        raise RankDeficient(S)
    beta = solve_triangular(R, Q.T @ y)
    resid = y - XS @ beta
    rss = squared_norm(resid)
    yy = squared_norm(y)
    rho = rss / yy if yy > 0 else 0.0
    return OlsFit(S, beta, rss / n, rho, len(S), rss)
