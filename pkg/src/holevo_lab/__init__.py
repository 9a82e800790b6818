"""Numerical laboratory for random quantum channels from subspaces.

Subpackages cover dense complex linear algebra, Haar/brickwork unitary
sampling with exact low-moment oracles, subspace channels and
min-output-entropy estimation, sphere concentration tooling, and
arbitrary-precision polynomial approximation of monotone functions,
all driven by seeded, reproducible experiment runners.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (GuardError, PrecisionError, ShapeError,
                     UnsupportedDegreeError, ValidationError)
from .rng import RngSeed

__all__ = [
    "GuardError",
    "PrecisionError",
    "RngSeed",
    "ShapeError",
    "UnsupportedDegreeError",
    "ValidationError",
    "__version__",
]
