"""Exception hierarchy for the lossrank package."""


class LossRankError(Exception):
    """Base class for all package errors."""


class DataError(LossRankError):
    """Problems with the supplied data (CLI exit code 2)."""


class ComputationError(LossRankError):
    """Numerical failures during fitting or selection (CLI exit code 3)."""


class NonFiniteInput(DataError):
    pass


class ConstantColumn(DataError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"column {column} has zero sample variance")


class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = ""
        if row is not None:
            where += f" row {row}"
        if column is not None:
            where += f" column {column!r}"
        super().__init__(f"{message}{' at' + where if where else ''}")


class MissingDataFile(DataError):
    pass


class EmptySubset(ComputationError):
    pass


class RankDeficient(ComputationError):
    def __init__(self, subset):
        self.subset = tuple(subset)
        super().__init__(f"design restricted to {self.subset} is rank deficient")


class DegenerateDesign(ComputationError):
    pass


class NoProgress(ComputationError):
    pass


class NoCandidates(ComputationError):
    pass


class DomainError(ComputationError, ValueError):
    pass


class Infeasible(ComputationError):
    """The loss-rank optimum over alpha does not exist (n(1 - rho) <= df)."""


class AllZeroCoefficients(ComputationError):
    pass


class DegreesOfFreedomOverflow(ComputationError):
    pass


class PerfectFit(ComputationError):
    pass


class AllInfeasible(ComputationError):
    def __init__(self, criterion):
        self.criterion = criterion
        super().__init__(f"every candidate is infeasible under {criterion}")


class DimensionTooLarge(ComputationError):
    pass


class NoConvergence(ComputationError):
    pass
