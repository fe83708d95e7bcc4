"""Exception types shared across the package."""


class DimensionMismatch(ValueError):
    """Operands live in different ambient dimensions."""


class HypothesisNotVerified(RuntimeError):
    """A regularity hypothesis required by an extraction was not verified."""


class InjectivityFailure(RuntimeError):
    """A projection expected to be one-to-one collapsed two samples.

    Carries the offending index pair so callers can report witnesses.
    """

    def __init__(self, message, witnesses=None):
        super().__init__(message)
        self.witnesses = witnesses or []


class SymmetryViolation(RuntimeError):
    """A containment that is guaranteed to be symmetric failed one way.

    This would falsify a verified geometric fact, so test suites must treat
    it as fatal rather than as an ordinary assertion failure.
    """


class UnresolvedRun(RuntimeError):
    """A numerical run stopped without resolving the behavior it tracked."""
