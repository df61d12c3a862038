"""Exception hierarchy shared by the library, the CLI and the MCP server."""

from typing import Any, Optional


class GaussFidError(Exception):
    """Base class for every error raised by gaussfid operations."""


class DimensionError(GaussFidError, ValueError):
    """Shapes or mode counts do not fit together."""


class DataError(GaussFidError, ValueError):
    """Input contains NaN or Inf entries."""


class DomainError(GaussFidError, ValueError):
    """Scalar argument outside the domain of a function."""


class PreconditionError(GaussFidError, ValueError):
    """Operation called on inputs it is not defined for."""


class UsageError(GaussFidError, ValueError):
    """Invalid command-line or operation parameters."""


class PhysicalityError(GaussFidError, ValueError):
    """Covariance matrix violates symmetry, positivity or the uncertainty principle."""

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report


class ParseError(GaussFidError, ValueError):
    """Malformed state file."""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field is not None:
            location.append(f"field '{field}'")
        super().__init__(f"{message} ({', '.join(location)})" if location else message)
        self.line = line
        self.field = field


class NumericalGuardError(GaussFidError, ArithmeticError):
    """A numerical guard (conditioning, truncation) refused to return a result."""


class DecompositionError(NumericalGuardError):
    """Williamson decomposition failed."""

    def __init__(self, message: str, eigenvalue: Optional[float] = None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class EvaluationError(NumericalGuardError):
    """Scalar function is not finite on the symplectic spectrum."""

    def __init__(self, message: str, eigenvalue: Optional[float] = None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class TruncationError(NumericalGuardError):
    """Fock cutoff growth hit the configured cap."""
