"""Exception hierarchy shared by every module.

Each error carries the process exit code the CLI maps it to:
2 for validation problems, 3 for infeasible or exhausted searches.
"""


class PmdError(Exception):
    exit_code = 2


class ValidationError(PmdError):
    exit_code = 2


class SearchError(PmdError):
    exit_code = 3


class NegativeEntry(ValidationError):
    pass


class RowSumViolation(ValidationError):
    pass


class SupportTooLarge(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class ZeroDirection(ValidationError):
    pass


class BadPivot(ValidationError):
    pass


class BadC(ValidationError):
    pass


class AlphaTooLarge(ValidationError):
    pass


class TooFewSamples(ValidationError):
    pass


class NotPSD(ValidationError):
    pass


class InconsistentBlocks(ValidationError):
    pass


class BudgetTooSmall(ValidationError):
    pass


class PremiseViolated(ValidationError):
    pass


class NullspaceMismatch(ValidationError):
    pass


class Singular(ValidationError):
    pass


class ZeroVariance(ValidationError):
    pass


class BadOrder(ValidationError):
    pass


class NotLaplacian(ValidationError):
    pass


class EigenMinBelowOne(ValidationError):
    pass


class CapExceeded(ValidationError):
    pass


class LpTooLarge(ValidationError):
    pass


class TooLarge(ValidationError):
    pass


class UnknownCommand(ValidationError):
    pass


class BadConfig(ValidationError):
    pass


class Infeasible(SearchError):
    pass


class SolverIterationLimit(SearchError):
    pass


class PeelStuck(SearchError):
    pass


class Failure(SearchError):
    pass


class NoFeasibleGuess(SearchError):
    pass


class NoMomentWitness(SearchError):
    pass


class Exhausted(SearchError):
    pass
