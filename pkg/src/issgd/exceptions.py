"""Exception taxonomy used across the package."""


class IssgdError(Exception):
    """Base class for all package errors."""


class InputError(IssgdError):
    """Malformed or inconsistent caller input (dimensions, non-finite data)."""


class NumericError(IssgdError):
    """An iterative kernel failed to converge."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class ConditioningError(IssgdError):
    """Linear system singular to working tolerance."""

    def __init__(self, message, condition_estimate=None):
        super().__init__(message)
        self.condition_estimate = condition_estimate


class StabilityError(IssgdError):
    """A matrix required to be Hurwitz (or a gain required to stabilize) is not."""


class StabilizabilityError(StabilityError):
    """No stabilizing solution exists / could be computed for the plant."""


class ConvergenceError(IssgdError):
    """Iteration budget exhausted before reaching the requested residual."""

    def __init__(self, message, last_residual=None, iterations=None):
        super().__init__(message)
        self.last_residual = last_residual
        self.iterations = iterations


class DomainError(IssgdError):
    """Argument outside the mathematical domain of the operation."""


class DisturbanceTooLargeError(DomainError):
    """Requested disturbance budget reaches or exceeds the certified supremum."""


class NoUltimateBoundError(DomainError):
    """The comparison function admits no ultimate bound (positive-definite regime)."""


class EscapeError(IssgdError):
    """A descent step left the admissible set; carries the offending iterate."""

    def __init__(self, message, iterate=None):
        super().__init__(message)
        self.iterate = iterate


class GenerationError(IssgdError):
    """Random instance generation failed repeatedly; reseed and retry."""
