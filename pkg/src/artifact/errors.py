"""Exception hierarchy shared by all modules."""


class ArtifactError(Exception):
    """Base class for every error raised by the package."""


class TruncationError(ArtifactError):
    """A truncated product or sum cannot meet its tail bound."""


class PoleError(ArtifactError):
    """A denominator vanishes at the evaluation point."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DomainError(ArtifactError):
    """Arguments lie outside the convergence domain of a defining series."""


class EvaluationError(ArtifactError):
    """An integrand produced a non-finite value."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class TailDivergenceError(ArtifactError):
    """A bilateral sum shows no decay within the configured cutoff."""


class PoleOnContourError(ArtifactError):
    """A pole of the integrand sits on (or too close to) the unit circle."""

    def __init__(self, message, offender=None):
        super().__init__(message)
        self.offender = offender


class GenerationError(ArtifactError):
    """A parameter profile cannot satisfy the balancing constraints."""


class PreconditionError(ArtifactError):
    """Inputs violate a documented precondition of an identity checker."""


class CalibrationError(ArtifactError):
    """No normalization convention reproduces a cross-check."""


class BudgetError(ArtifactError):
    """A checker exceeded its wall-clock budget."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
