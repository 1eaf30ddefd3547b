"""Exception types shared across the package."""


class DomainError(ValueError):
    """A radius or exponent falls outside the valid domain."""


class ProfileError(ValueError):
    """A metric profile violates its smoothness/positivity invariants."""


class GridResolutionError(ValueError):
    """The grid is too coarse for the requested computation.

    Carries ``required_n`` with a hint for the minimal node count.
    """

    def __init__(self, message, required_n=None):
        super().__init__(message)
        self.required_n = required_n


class ConvergenceError(RuntimeError):
    """An iterative solve failed to converge.

    ``last_iterate`` holds the final field for post-mortem inspection.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class MonotonicityError(RuntimeError):
    """A sequence that must be monotone (within tolerance) is not."""


class InfeasibleExponentError(ValueError):
    """Exponent-formula hypotheses are violated (named in the message)."""


class StabilizationError(RuntimeError):
    """An outer-radius sweep hit r_max before stabilizing."""
