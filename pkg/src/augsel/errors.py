class AugselError(Exception):
    """Base class for package errors."""


class DomainError(AugselError, ValueError):
    """Input violates a documented precondition."""


class FormatError(AugselError):
    """File does not start with the expected magic/version."""


class CorruptionError(AugselError):
    """File header is valid but the payload is inconsistent or truncated."""


class NumericError(AugselError, ArithmeticError):
    """Computation produced non-finite values or failed to converge."""
