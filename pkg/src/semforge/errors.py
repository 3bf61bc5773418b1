"""Exception types shared across the package."""


class SemforgeError(Exception):
    """Base class for all errors raised by semforge."""


class ParseError(SemforgeError, ValueError):
    """Malformed model syntax. Carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ModelError(SemforgeError, ValueError):
    """Structurally inconsistent model (contradictory variable roles etc.)."""


class DataError(SemforgeError, ValueError):
    """Dataset unusable for the requested model or operation."""


class SingularityError(SemforgeError, ArithmeticError):
    """(I - B) is singular, so the reduced form does not exist."""


class NotPositiveDefiniteError(SemforgeError, ArithmeticError):
    """A matrix that must be positive definite is not (e.g. Sigma in MLW)."""


class GenerationError(SemforgeError, ValueError):
    """A synthetic-model configuration cannot be realised."""
