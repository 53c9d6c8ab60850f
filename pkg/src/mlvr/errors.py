"""Exception hierarchy shared across the package."""

from __future__ import annotations


class MlvrError(Exception):
    pass


class ParseError(MlvrError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ConfigError(MlvrError, ValueError):
    pass


class DimensionError(MlvrError, ValueError):
    pass


class NumericalError(MlvrError, ArithmeticError):
    pass


class CgBreakdown(NumericalError):
    """Non-positive curvature ``<p, Ap> <= 0`` met inside CG."""


class NotDescentError(MlvrError, ValueError):
    pass


class LineSearchError(NumericalError):
    def __init__(self, message: str, last_step: float):
        self.last_step = last_step
        super().__init__(message)


class DivergenceError(NumericalError):
    """Iterates or loss became non-finite; ``trace`` holds records so far."""

    def __init__(self, message: str, trace=None):
        self.trace = trace
        super().__init__(message)


class ConsistencyError(MlvrError, AssertionError):
    """Coupled gradient at the anchor drifted from the fine-level gradient."""
