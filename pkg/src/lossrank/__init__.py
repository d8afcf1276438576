"""Loss-rank model selection along the lasso path."""

from .criteria import ALL_CRITERIA, Criterion, CriterionInput, bic, loss_rank
from .errors import ComputationError, DataError, LossRankError
from .lasso_path import candidate_subsets, coefficients_at, compute_lars_path
from .linreg_core import Dataset, ols_fit, standardize
from .selector import Fit, SelectionReport, classify_fit, select
from .simbench import SimDesign, example1, example2, run_study

__version__ = "0.1.0"

__all__ = [
    "ALL_CRITERIA",
    "ComputationError",
    "Criterion",
    "CriterionInput",
    "DataError",
    "Dataset",
    "Fit",
    "LossRankError",
    "SelectionReport",
    "SimDesign",
    "bic",
    "candidate_subsets",
    "classify_fit",
    "coefficients_at",
    "compute_lars_path",
    "example1",
    "example2",
    "loss_rank",
    "ols_fit",
    "run_study",
    "select",
    "standardize",
]
