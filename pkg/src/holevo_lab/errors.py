"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: validation errors -> 2,
guard violations -> 3, precision errors -> 4.
"""


class ValidationError(ValueError):
    """Input violates a documented contract (shape, domain, invariant)."""


class ShapeError(ValidationError):
    """Dimension mismatch between operands."""


class GuardError(ValidationError):
    """A tractability guard was exceeded (e.g. net dimension too large)."""


class PrecisionError(ValidationError):
    """Working precision is insufficient for the requested computation."""


class UnsupportedDegreeError(ValidationError):
    """Exact Haar moments are only implemented for degree t <= 2."""
