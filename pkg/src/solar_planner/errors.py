"""Exception hierarchy shared by the library and the command-line front end."""

from __future__ import annotations


class SolarPlannerError(Exception):
    """Base class; ``category`` is the machine-readable tag reported by the CLI."""

    category = "Error"


class InfeasibleSubsidy(SolarPlannerError, ValueError):
    """The subsidy violates the minimum rooftop-minus-subscription cost gap."""

    category = "InfeasibleSubsidy"


class DegenerateThreshold(SolarPlannerError, ValueError):
    """Adoption cost below the generation credit, so the threshold would be negative."""

    category = "DegenerateThreshold"


class ImmediateAdoption(SolarPlannerError):
    """Initial demand already at or above the threshold: adoption time is zero a.s."""

    category = "ImmediateAdoption"


class EmptyInterval(SolarPlannerError, ValueError):
    category = "EmptyInterval"


class NoFeasiblePolicy(SolarPlannerError):
    category = "NoFeasiblePolicy"


class DegenerateLine(SolarPlannerError, ValueError):
    category = "DegenerateLine"


class NumericalDerivativeFailure(SolarPlannerError, ArithmeticError):
    category = "NumericalDerivativeFailure"


class ParseError(SolarPlannerError, ValueError):
    category = "ParseError"


class ValidationError(SolarPlannerError, ValueError):
    """Invariant violation; ``field`` names the offending configuration entry."""

    category = "ValidationError"

    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class CheckFailed(SolarPlannerError):
    category = "CheckFailed"
