"""Exception types shared across the package.

The CLI maps these onto exit codes: ``ConfigError`` -> 2,
``InvariantViolation`` -> 3, ``NumericalFailure`` -> 4.
"""


class ConfigError(ValueError):
    """A configuration document or parameter set failed validation."""


class InvariantViolation(ValueError):
    """A documented invariant or precondition does not hold.

    ``invariant`` names the violated rule, e.g. ``"BoxParams: n >= 1"``.
    """

    def __init__(self, invariant, detail=""):
        self.invariant = invariant
        self.detail = detail
        msg = invariant if not detail else f"{invariant} ({detail})"
        super().__init__(msg)


class NumericalFailure(RuntimeError):
    """An iterative solver failed to converge."""

    def __init__(self, message, iterations=None):
        self.iterations = iterations
        if iterations is not None:
            message = f"{message} after {iterations} iterations"
        super().__init__(message)
