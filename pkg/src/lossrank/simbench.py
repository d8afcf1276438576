"""Monte Carlo studies of the selectors on AR(1) Gaussian designs."""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import toeplitz

from .criteria import ALL_CRITERIA, Criterion
from .errors import LossRankError
from .linreg_core import Dataset
from .selector import DEFAULT_GRID_COUNT, Fit, classify_fit, select

log = logging.getLogger(__name__)

# stream roles for the per-replication generators
ROLE_DESIGN = 0
ROLE_NOISE = 1
ROLE_FROZEN_DESIGN = 2

TABLE_ORDER = (Criterion.GCV, Criterion.BIC_TILDE, Criterion.BIC, Criterion.LR)
DISPLAY = {Criterion.GCV: "GCV", Criterion.BIC_TILDE: "BIC~", Criterion.BIC: "BIC", Criterion.LR: "LR"}


@dataclass(frozen=True)
class SimDesign:
    n: int
    d: int
    beta_true: tuple
    sigma: float
    corr: float = 0.5
    reps: int = 100
    criteria: tuple = ALL_CRITERIA
    seed: int = 1
    fixed_design: bool = False
    grid_count: int = DEFAULT_GRID_COUNT

    def __post_init__(self):
        beta = tuple(float(b) for b in self.beta_true)
        if len(beta) != self.d:
            raise ValueError(f"beta_true has {len(beta)} entries, expected d={self.d}")
        if not any(b != 0 for b in beta):
            raise ValueError("beta_true needs at least one nonzero entry")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not 0 <= self.corr < 1:
            raise ValueError("corr must lie in [0, 1)")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        object.__setattr__(self, "beta_true", beta)
        object.__setattr__(self, "criteria", tuple(Criterion.parse(c) for c in self.criteria))

    @property
    def truth(self) -> tuple:
        return tuple(j for j, b in enumerate(self.beta_true) if b != 0)


def example1(n=100, sigma=1.0, **kw) -> SimDesign:
    """Eight AR(1) covariates with coefficients (3, 1.5, 0, 0, 2, 0, 0, 0)."""
    return SimDesign(n=n, d=8, beta_true=(3, 1.5, 0, 0, 2, 0, 0, 0), sigma=sigma, **kw)


def example2(n=500, sigma=1.0, d=300, **kw) -> SimDesign:
    """300 AR(1) covariates, coefficient 10 on every 30th one (1-based 30, 60, ..., 300)."""
    beta = np.zeros(d)
    beta[29::30] = 10.0
    return SimDesign(n=n, d=d, beta_true=tuple(beta), sigma=sigma, **kw)


def ar1_covariance(d: int, corr: float) -> np.ndarray:
    return toeplitz(corr ** np.arange(d))


def ar1_cholesky(d: int, corr: float) -> np.ndarray:
    return np.linalg.cholesky(ar1_covariance(d, corr))


def sample_ar1_design(n: int, d: int, corr: float, rng: np.random.Generator) -> np.ndarray:
    """Rows iid N(0, S) with ``S_ij = corr^|i-j|``."""
    if not 0 <= corr < 1:
        raise ValueError("corr must lie in [0, 1)")
    L = ar1_cholesky(d, corr)
    return rng.standard_normal((n, d)) @ L.T


def replication_rng(seed: int, rep_index: int, role: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(role), int(rep_index)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class ReplicationOutcome:
    rep_index: int
    # criterion -> (classification, zero count, selected subset)
    results: Dict[Criterion, Tuple[Fit, int, tuple]] = field(default_factory=dict)
    error: Optional[str] = None


def draw_replication(design: SimDesign, rep_index: int) -> Dataset:
    if design.fixed_design:
        X = sample_ar1_design(design.n, design.d, design.corr, replication_rng(design.seed, 0, ROLE_FROZEN_DESIGN))
    else:
        X = sample_ar1_design(design.n, design.d, design.corr, replication_rng(design.seed, rep_index, ROLE_DESIGN))
    eps = replication_rng(design.seed, rep_index, ROLE_NOISE).standard_normal(design.n)
    y = X @ np.asarray(design.beta_true) + design.sigma * eps
    return Dataset(X, y)


def run_replication(design: SimDesign, rep_index: int) -> ReplicationOutcome:
    if not 0 <= rep_index < design.reps:
        raise IndexError(f"rep_index {rep_index} outside [0, {design.reps})")
    try:
        data = draw_replication(design, rep_index)
        report = select(data, design.criteria, grid_count=design.grid_count)
    except (LossRankError, np.linalg.LinAlgError) as exc:
        log.warning("replication %d failed: %s", rep_index, exc)
        return ReplicationOutcome(rep_index, {}, f"{type(exc).__name__}: {exc}")
    truth = design.truth
    results = {}
    for crit in design.criteria:
        S = report.chosen[crit].subset
        results[crit] = (classify_fit(S, truth), design.d - len(S), S)
    return ReplicationOutcome(rep_index, results, None)


@dataclass
class CellTally:
    underfit: int = 0
    correct: int = 0
    overfit: int = 0
    zeros_total: int = 0

    @property
    def count(self) -> int:
        return self.underfit + self.correct + self.overfit

    @property
    def avg_zeros(self) -> float:
        return self.zeros_total / self.count if self.count else float("nan")

    def rate(self, which: str) -> float:
        return 100.0 * getattr(self, which) / self.count if self.count else float("nan")


@dataclass
class MonteCarloTally:
    design: SimDesign
    cells: Dict[Criterion, CellTally]
    failures: List[Tuple[int, str]] = field(default_factory=list)

    @property
    def reps(self) -> int:
        return self.design.reps

    def rows(self) -> List[dict]:
        out = []
        for crit in TABLE_ORDER:
            if crit not in self.cells:
                continue
            c = self.cells[crit]
            out.append({
                "sigma": self.design.sigma,
                "n": self.design.n,
                "d": self.design.d,
                "method": DISPLAY[crit],
                "underfitted_pct": c.rate("underfit"),
                "correct_pct": c.rate("correct"),
                "overfitted_pct": c.rate("overfit"),
                "avg_zeros": c.avg_zeros,
                "underfit": c.underfit,
                "correct": c.correct,
                "overfit": c.overfit,
                "reps": self.design.reps,
                "failures": len(self.failures),
            })
        return out

    def to_json(self) -> str:
        return json.dumps({
            "design": {
                "n": self.design.n, "d": self.design.d, "sigma": self.design.sigma,
                "corr": self.design.corr, "reps": self.design.reps, "seed": self.design.seed,
                "fixed_design": self.design.fixed_design,
            },
            "rows": self.rows(),
            "failures": [{"rep": r, "error": e} for r, e in self.failures],
        }, indent=2)

    def to_csv(self) -> str:
        rows = self.rows()
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()) if rows else ["method"], lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
        return buf.getvalue()

    def to_table(self) -> str:
        head = ("sigma", "n", "Method", "Under-fitted(%)", "Correctly fitted(%)", "Overfitted(%)", "Ave. No. of zeros")
        lines = ["\t".join(head)]
        for r in self.rows():
            lines.append("\t".join([
                f"{r['sigma']:.6g}", str(r["n"]), r["method"],
                f"{r['underfitted_pct']:.6g}", f"{r['correct_pct']:.6g}",
                f"{r['overfitted_pct']:.6g}", f"{r['avg_zeros']:.6g}",
            ]))
        if self.failures:
            lines.append(f"# {len(self.failures)} failed replication(s)")
        return "\n".join(lines)


def tally(design: SimDesign, outcomes) -> MonteCarloTally:
    cells = {c: CellTally() for c in design.criteria}
    failures = []
    for out in sorted(outcomes, key=lambda o: o.rep_index):
        if out.error is not None:
            failures.append((out.rep_index, out.error))
            continue
        for crit, (cls, zeros, _) in out.results.items():
            cell = cells[crit]
            if cls is Fit.CORRECT:
                cell.correct += 1
            elif cls is Fit.OVERFITTED:
                cell.overfit += 1
            else:
                cell.underfit += 1
            cell.zeros_total += zeros
    return MonteCarloTally(design, cells, failures)


def _run_one(args):
    design, rep = args
    return run_replication(design, rep)


def run_study(design: SimDesign, workers: int = 1) -> MonteCarloTally:
    """Run every replication and reduce; the result does not depend on ``workers``."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    jobs = [(design, r) for r in range(design.reps)]
    if workers == 1 or design.reps == 1:
        outcomes = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_one, jobs, chunksize=max(1, design.reps // (4 * workers))))
    return tally(design, outcomes)
