"""Exception types shared across the package."""


class ConfigValidationError(ValueError):
    """A run configuration (CLI or file) failed validation."""


class RareConditioningError(RuntimeError):
    """Rejection sampling produced too few accepted samples within budget."""

    def __init__(self, accepted, budget, message=None):
        self.accepted = accepted
        self.budget = budget
        super().__init__(
            message
            or f"conditioning too rare: {accepted} accepted within budget {budget}"
        )


class EmptyConditioningError(ValueError):
    """The conditioning event has probability zero."""


class GridOverflowError(RuntimeError):
    """The rescaled integer grid for an exact DP exceeds the state cap."""


class UndecidableTailError(ValueError):
    """A tail rule is outside the family with decidable partial-sum behavior."""
