"""Sublinear (G-)expectations: finite capacity models, the G-heat equation,
cylinder payoffs by backward reduction, and controlled Monte Carlo."""

from .errors import (
    ConfigurationError,
    GExpectError,
    InputError,
    NumericalFailure,
    PayoffSyntaxError,
    PreconditionError,
)
from .gfunction import Interval1D, MatrixList, degeneracy_report, g_value
from .payoff import Payoff, certify, parse

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "GExpectError",
    "InputError",
    "Interval1D",
    "MatrixList",
    "NumericalFailure",
    "Payoff",
    "PayoffSyntaxError",
    "PreconditionError",
    "certify",
    "degeneracy_report",
    "g_value",
    "parse",
    "__version__",
]
