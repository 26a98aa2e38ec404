"""Exception types shared across the package."""


class NumericalDomainError(ValueError):
    """A dynamics or policy evaluation produced a non-finite value."""


class IngestError(ValueError):
    """A trajectory file violates the CSV contract (bad row, bounds, ordering)."""


class InfeasibilityError(RuntimeError):
    """The constrained solver could not reduce constraint violation.

    Carries the worst-violating grid point so callers can report where the
    decrease condition failed.
    """

    def __init__(self, message, worst_point=None, worst_violation=None):
        super().__init__(message)
        self.worst_point = worst_point
        self.worst_violation = worst_violation


class LineSearchError(RuntimeError):
    """Non-finite values encountered during the inner line search."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []
