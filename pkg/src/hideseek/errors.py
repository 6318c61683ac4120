"""Exception types raised across the package."""


class HideSeekError(Exception):
    """Base class for all errors raised by this package."""


class InsufficientData(HideSeekError):
    """A sample or stream ran out before the algorithm could finish."""


class BudgetExceeded(HideSeekError):
    """A protocol emitted a message longer than its bit budget."""

    def __init__(self, round_index: int, length: int, budget: int):
        self.round_index = round_index
        self.length = length
        self.budget = budget
        super().__init__(
            f"round {round_index}: message has {length} bits, budget is {budget}"
        )


class BudgetTooSmall(HideSeekError):
    """The bit budget cannot hold even the minimal algorithm state."""


class InvalidReduction(HideSeekError):
    pass


class EnumerationTooLarge(HideSeekError):
    pass


class RhoOutOfRange(HideSeekError, ValueError):
    pass


class DimensionMismatch(HideSeekError, ValueError):
    pass


class DivisionByZeroSupport(HideSeekError, ValueError):
    pass


class NotIndependent(HideSeekError, ValueError):
    pass


class AlphabetTooLarge(HideSeekError, ValueError):
    pass


class UnboundedRatio(HideSeekError, ValueError):
    pass


class TargetNotBracketed(HideSeekError):
    pass


class ConfigError(HideSeekError, ValueError):
    pass
