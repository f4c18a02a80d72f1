"""Exception types shared across the package."""


class UnstableChainError(ValueError):
    """The mechanical model has a non-positive normal-mode frequency."""


class NumericalFailureError(RuntimeError):
    """A quadrature or accumulation failed its built-in convergence check.

    Carries the disagreeing values when raised by a refinement check.
    """

    def __init__(self, message, values=None):
        super().__init__(message)
        self.values = values


class InvariantViolationError(RuntimeError):
    """A self-check invariant (orthogonality, kernel normalization, ...) failed."""


class ConfigError(ValueError):
    """Bad or missing run-configuration input."""
