"""Bayesian recursive structural equation models for residual feed intake."""

from .errors import DegenerateInputError, NumericalError, RankDeficiencyError, RfiError, StructuralError, ValidationError

__version__ = "0.1.0"

__all__ = [
    "DegenerateInputError",
    "NumericalError",
    "RankDeficiencyError",
    "RfiError",
    "StructuralError",
    "ValidationError",
]
