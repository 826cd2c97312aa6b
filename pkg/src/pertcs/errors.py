"""Exception types shared across the package."""


class PreconditionError(ValueError):
    """A mathematical precondition of a bound or solver does not hold.

    ``condition`` names the violated requirement in words so that callers
    (and the CLI) can report it verbatim.
    """

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition or message


class ConditionViolation(PreconditionError):
    """One of the recovery-theorem hypotheses is false for the given inputs."""


class BudgetError(PreconditionError):
    """A relative perturbation budget is undefined or outside [0, 1)."""


class RankDeficientError(PreconditionError):
    """A restricted matrix that must have full column rank does not."""
