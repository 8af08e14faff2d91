"""Exception hierarchy shared by every recokit module."""


class RecokitError(Exception):
    """Base class for all toolkit errors."""


class DataError(RecokitError):
    pass


class MalformedRow(DataError):
    def __init__(self, row, reason):
        self.row = row
        self.reason = reason
        super().__init__(f"malformed row {row}: {reason}")


class EmptyDataset(DataError):
    pass


class InvalidSpec(RecokitError, ValueError):
    pass


class TooFewInteractions(RecokitError, ValueError):
    pass


class EmptyJoin(RecokitError, ValueError):
    pass


class InvalidCutoff(RecokitError, ValueError):
    pass


class NoEvaluableUsers(RecokitError, ValueError):
    pass


class InvalidReferenceTime(RecokitError, ValueError):
    pass


class Divergence(RecokitError, ArithmeticError):
    """Raised when SGD training produces a non-finite parameter."""

    def __init__(self, epoch):
        self.epoch = epoch
        super().__init__(
            f"non-finite parameters after epoch {epoch}; learning rate is likely too high"
        )


class NotFittedError(RecokitError, AttributeError):
    pass


class ContinuousAxisInGrid(RecokitError, ValueError):
    pass


class BudgetExceeded(RecokitError, ValueError):
    pass


class ConfigError(RecokitError, ValueError):
    pass


class ModelFormatError(RecokitError, ValueError):
    pass
