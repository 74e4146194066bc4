"""Exception hierarchy shared by all kronrank modules.

Every error carries a short machine-readable ``category`` string that the
CLI prints on failure, so scripts can branch on the first token of stderr.
"""


class KronRankError(Exception):
    """Base class for all errors raised by this package."""

    category = "error"


class InvalidInputError(KronRankError):
    category = "invalid-input"


class NotPositiveDefiniteError(KronRankError):
    category = "not-positive-definite"


class NotPositiveSemidefiniteError(KronRankError):
    category = "not-psd"


class SingularMatrixError(KronRankError):
    category = "singular-matrix"


class IncompleteGraphError(KronRankError):
    category = "incomplete-graph"


class UnsupportedCombinationError(KronRankError):
    category = "unsupported-combination"


class ResourceLimitError(KronRankError):
    category = "resource-limit"


class SolverBreakdownError(KronRankError):
    """BiCGSTAB denominator collapsed; carries the last iterate seen."""

    category = "solver-breakdown"

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class DivergenceError(KronRankError):
    category = "divergence"


class UndefinedLossError(KronRankError):
    category = "undefined-loss"


class MalformedFileError(KronRankError):
    category = "malformed-file"


class VersionMismatchError(KronRankError):
    category = "version-mismatch"
