"""
Errors Module

Exception types raised across the needlet toolkit. Every error is also a
ValueError, so callers that only care about "bad input" can catch that.
"""

from typing import Optional, Tuple


class NeedletError(ValueError):
    """Base class for all toolkit errors."""


class DomainError(NeedletError):
    """Argument outside the mathematical domain of an operation."""


class ConfigurationError(NeedletError):
    """Inconsistent configuration: missing design, under-certified rule, frame mismatch."""


class DesignParseError(NeedletError):
    """Malformed or empty design file."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        """
        Args:
            message: Human-readable description
            line_number: 1-based line of the offending entry, if known
        """
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class DesignValidationError(NeedletError):
    """Design node too far from the unit sphere."""


class CertificationError(NeedletError):
    """Quadrature rule failed its polynomial exactness check."""

    def __init__(self, message: str, witness: Optional[Tuple[int, int]] = None,
                 residual: float = 0.0):
        super().__init__(message)
        self.witness = witness
        self.residual = residual
