"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Shapes do not line up."""


class ContractError(RuntimeError):
    """An API precondition failed (non-scalar loss, missing grads, ...)."""


class InfeasibleError(ValueError):
    """The constraint set admits no solution."""


class SolverBudgetError(RuntimeError):
    """The exact search exceeded its node budget. Never answered with a guess."""


class BoundError(ValueError):
    """Input too large for an enumeration oracle."""


class DataValidationError(ValueError):
    """A dataset record violates its declared contract."""
