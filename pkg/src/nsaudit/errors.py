"""Exception types shared across the toolkit."""

from __future__ import annotations


class AuditError(Exception):
    """Base class for every error raised by nsaudit."""


class FieldError(AuditError, ValueError):
    """Malformed grid or field data (shape mismatch, non-finite values)."""


class DomainError(AuditError, ValueError):
    """Argument outside the domain where a closed-form law is defined."""


class SingularityError(AuditError, ArithmeticError):
    """Evaluation hit a pole of a formula.

    ``verdict`` carries the regime classification when one applies.
    """

    def __init__(self, message: str, verdict=None):
        super().__init__(message)
        self.verdict = verdict


class GeometryError(AuditError, ValueError):
    """Degenerate tube geometry (repeated points, zero arclength)."""


class CFLError(AuditError, RuntimeError):
    """Time step too large for the explicit scheme."""

    def __init__(self, message: str, required_dt: float):
        super().__init__(message)
        self.required_dt = required_dt


class PoissonError(AuditError, RuntimeError):
    """Pressure Poisson solve did not reach its tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class SteadyStateError(AuditError, RuntimeError):
    """Steady state not reached within the step budget."""


class ConfigError(AuditError, ValueError):
    """Bad configuration file or key."""
