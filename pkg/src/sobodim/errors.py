"""Exception types shared across the package."""


class SobodimError(Exception):
    """Base class for all package errors."""


class SpaceMismatchError(SobodimError, ValueError):
    def __init__(self, left, right):
        super().__init__(f"space mismatch: {left} vs {right}")
        self.left = left
        self.right = right


class EmptyInputError(SobodimError, ValueError):
    def __init__(self, what="sample"):
        super().__init__(f"empty input: {what}")


class ParameterRangeError(SobodimError, ValueError):
    """A parameter falls outside the admissible range of a formula.

    ``interval`` carries the admissible range as ``(lo, hi, lo_open, hi_open)``
    when one applies.
    """

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class ConfigError(SobodimError, ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""
