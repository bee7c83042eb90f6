"""
Errors: exception types raised across the skewdiff package.
"""

from typing import Any, Dict, List, Optional, Tuple


class DomainError(ValueError):
    """Argument outside the domain of an operation (α ∉ (0,1), a ≥ b, ...)."""


class UndefinedValueError(ValueError):
    """A quantity that needs the density limits at 0 was requested without them."""


class DegeneratePointError(ValueError):
    """Zero denominator at a breakpoint."""


class CriteriaNotApplicable(ValueError):
    """A criterion was requested outside the setting where it is valid."""


class ScaleUnavailableError(ValueError):
    """The scale function cannot be built for this configuration."""


class BoundaryRangeError(ValueError):
    """h_inverse was asked for a value outside (h(-inf), h(+inf))."""

    def __init__(self, message: str, h_minus: float, h_plus: float):
        super().__init__(message)
        self.h_minus = h_minus
        self.h_plus = h_plus


class PlanError(ValueError):
    """A simulation plan violates its invariants."""


class ConfigError(ValueError):
    """A configuration file could not be read or validated."""

    def __init__(self, message: str, diagnostics: Optional[List[str]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class ExplosiveConfigError(RuntimeError):
    """Simulation refused because the configuration is not known to be conservative."""

    def __init__(self, message: str, evidence: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.evidence = evidence or {}


class PreconditionError(ValueError):
    """Standing assumptions of a derived model do not all hold."""

    def __init__(self, message: str, evidence: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.evidence = evidence or {}


class OutOfDomainError(DomainError):
    """A point lies beyond the tabulated part of the scale function."""

    def __init__(self, message: str, edges: Tuple[float, float]):
        super().__init__(message)
        self.edges = edges
