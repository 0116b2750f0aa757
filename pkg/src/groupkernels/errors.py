"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
2 for invalid input, 3 for a failed mathematical precondition and 4 for
numerical non-convergence.
"""


class GroupKernelError(Exception):
    exit_code = 1
    kind = "error"


class ValidationError(GroupKernelError, ValueError):
    exit_code = 2
    kind = "validation"


class MalformedElementError(ValidationError):
    kind = "malformed-element"


class MismatchError(ValidationError):
    """Operands live on different groups, windows or coefficient sizes."""

    kind = "mismatch"


class DimensionError(MismatchError):
    kind = "dimension"


class ResourceLimitError(ValidationError):
    kind = "resource-limit"

    def __init__(self, message, cardinality=None):
        super().__init__(message)
        self.cardinality = cardinality


class PreconditionError(GroupKernelError):
    exit_code = 3
    kind = "precondition"


class GrowthPreconditionError(PreconditionError):
    kind = "growth-precondition"


class DecayPreconditionError(PreconditionError):
    kind = "decay-precondition"


class WindowTooSmallError(PreconditionError):
    kind = "window-too-small"


class NotInvertibleError(PreconditionError):
    kind = "not-invertible"


class InsufficientDataError(PreconditionError):
    kind = "insufficient-data"


class NonConvergenceError(GroupKernelError):
    exit_code = 4
    kind = "non-convergence"
