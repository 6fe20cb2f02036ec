"""Exception hierarchy shared by every module of the package."""


class EngineError(Exception):
    """Base class for all errors raised by transmon_engine."""


class ConfigError(EngineError, ValueError):
    """Invalid or incomplete configuration (missing key, bad value, open loop)."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key


class DomainError(EngineError, ValueError):
    """Input outside the mathematical domain of an operation."""


class SingularityError(DomainError):
    """A closed form hits a zero denominator."""


class PreconditionError(EngineError, ValueError):
    """A numerical precondition (step size, dimensions) is violated."""


class AmbiguityError(EngineError, ArithmeticError):
    """A steady state is not unique: the Liouvillian kernel is degenerate."""

    def __init__(self, message: str, smallest_singular_values=None):
        super().__init__(message)
        self.smallest_singular_values = smallest_singular_values


class ToleranceError(EngineError, ArithmeticError):
    """An iterative numerical procedure failed to reach its tolerance."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class TruncationError(EngineError, ArithmeticError):
    """Fock-space truncation cannot be made to satisfy the tail-population bound."""


class EmptyResultError(EngineError, ValueError):
    """A reduction over a grid had no present values."""
