"""Elliptic separation of variables toolkit."""

from .theta import (
    Lattice,
    LatticeError,
    PoleProximityError,
    ThetaError,
    ThetaEvaluator,
    TruncationError,
)

__all__ = [
    "Lattice",
    "LatticeError",
    "PoleProximityError",
    "ThetaError",
    "ThetaEvaluator",
    "TruncationError",
]

__version__ = "0.1.0"
