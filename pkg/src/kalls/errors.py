"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An argument violates an operation's precondition."""


class BudgetExhausted(Exception):
    """The labeling oracle has no budget left for a charged query.

    This is a stop signal for the learners, not a failure.
    """


class UndefinedResultError(ValueError):
    """A statistic could not be computed from the available draws."""
