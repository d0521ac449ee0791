"""Exception hierarchy shared by all engines.

Every computational failure derives from :class:`ComputationError`, which is
what the command line maps to exit status 2.
"""


class ComputationError(RuntimeError):
    """Base class for failures that occur while computing a result."""

    kind = "computation-error"

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        return {"type": self.kind, "message": str(self), "details": self.details}


class InvalidDistributionError(ValueError):
    """Probabilities are negative or do not sum to one."""


class NonMixingCoinError(ValueError):
    """Coin with ``e == 0`` or ``f == 0``; the walk never forgets its coin."""


class BoundaryOverflowError(ComputationError):
    kind = "boundary-overflow"


class DegenerateStateError(ComputationError):
    kind = "degenerate-state"


class StateExplosionError(ComputationError):
    kind = "state-explosion"


class ConvergenceError(ComputationError):
    kind = "non-convergence"


class CapExceededError(ComputationError):
    kind = "cap-exceeded"


class MissingBoundsError(ComputationError):
    kind = "missing-extremal-bounds"
