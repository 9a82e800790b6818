"""Dense complex linear algebra primitives.

Vectors and matrices are plain ``numpy`` arrays of dtype complex128.
Validation helpers enforce the invariants (unit norm, Hermiticity,
positivity, unit trace) at the entry points that require them.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError, ValidationError

# Base of all logarithms used for entropies.  Recorded in every
# experiment report so numbers cannot silently mix ln and log2.
DEFAULT_LOG_BASE = 2.0

HERMITICITY_TOL = 1e-12
EIGENVALUE_FLOOR = -1e-10
TRACE_TOL = 1e-10
UNIT_NORM_TOL = 1e-12

# Eigenvalues below this are clamped to zero before taking logs.
LOG_CLAMP = 1e-12


def _as_complex_matrix(M) -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2:
        raise ShapeError(f"expected a 2-d array, got shape {M.shape}")
    if not np.all(np.isfinite(M.real)) or not np.all(np.isfinite(M.imag)):
        raise ValidationError("matrix has non-finite entries")
    return M


def check_unit_vector(x) -> np.ndarray:
    """Validate and return x as a unit l2-norm complex vector."""
    x = np.asarray(x, dtype=complex).ravel()
    nrm = np.linalg.norm(x)
    if abs(nrm - 1.0) > UNIT_NORM_TOL:
        raise ValidationError(f"vector norm {nrm} deviates from 1 beyond {UNIT_NORM_TOL}")
    return x


def check_density_matrix(rho) -> np.ndarray:
    """Validate Hermiticity, positivity and unit trace of a density matrix."""
    rho = _as_complex_matrix(rho)
    if rho.shape[0] != rho.shape[1]:
        raise ShapeError(f"density matrix must be square, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITICITY_TOL:
        raise ValidationError("matrix is not Hermitian within tolerance")
    evals = np.linalg.eigvalsh(rho)
    if evals.min() < EIGENVALUE_FLOOR:
        raise ValidationError(f"eigenvalue {evals.min()} below floor {EIGENVALUE_FLOOR}")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValidationError(f"trace {tr} deviates from 1 beyond {TRACE_TOL}")
    return rho


def op_reshape(x, k: int, d: int) -> np.ndarray:
    """Rearrange a vector in C^(k*d) into the k x d matrix of its
    coefficients in the standard product basis."""
    x = np.asarray(x, dtype=complex).ravel()
    if x.size != k * d:
        raise ShapeError(f"vector of dim {x.size} cannot reshape to {k}x{d}")
    return x.reshape(k, d)


def vec(M) -> np.ndarray:
    """Inverse of :func:`op_reshape`: row-major flattening."""
    return _as_complex_matrix(M).ravel()


def partial_trace_second(rho, k: int, d: int) -> np.ndarray:
    """Trace out the second (d-dimensional) factor of a state on
    C^k (x) C^d."""
    rho = _as_complex_matrix(rho)
    if rho.shape != (k * d, k * d):
        raise ShapeError(f"expected {(k * d, k * d)}, got {rho.shape}")
    return np.einsum("iaja->ij", rho.reshape(k, d, k, d))


def schatten_norm(M, p) -> float:
    """lp-norm of the singular values; p=2 is Frobenius, p=inf operator norm."""
    M = _as_complex_matrix(M)
    if p != np.inf and p < 1:
        raise ValidationError(f"Schatten norm requires p >= 1, got {p}")
    if p == 2:
        return float(np.linalg.norm(M))
    s = np.linalg.svd(M, compute_uv=False)
    if p == np.inf:
        return float(s[0]) if s.size else 0.0
    return float(np.sum(s**p) ** (1.0 / p))


def _clamped_eigvals(rho) -> np.ndarray:
    evals = np.linalg.eigvalsh(rho)
    evals = np.where(evals < LOG_CLAMP, 0.0, evals)
    return evals


def von_neumann_entropy(rho, base: float = DEFAULT_LOG_BASE) -> float:
    """-sum lam log lam over the spectrum, with 0 log 0 := 0."""
    rho = check_density_matrix(rho)
    evals = _clamped_eigvals(rho)
    nz = evals[evals > 0]
    return float(-np.sum(nz * np.log(nz)) / np.log(base))


def renyi_entropy(rho, p: float, base: float = DEFAULT_LOG_BASE) -> float:
    """(1/(1-p)) log Tr rho^p for p > 1."""
    if p <= 1:
        raise ValidationError("renyi_entropy requires p > 1; use von_neumann_entropy at p=1")
    rho = check_density_matrix(rho)
    evals = _clamped_eigvals(rho)
    return float(np.log(np.sum(evals**p)) / ((1.0 - p) * np.log(base)))


def output_entropy(rho, p: float, base: float = DEFAULT_LOG_BASE) -> float:
    """S_p with the p=1 case routed to the von Neumann entropy."""
    if p == 1:
        return von_neumann_entropy(rho, base=base)
    return renyi_entropy(rho, p, base=base)


def random_unit_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform point on the unit sphere of C^dim."""
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return z / np.linalg.norm(z)


def random_unit_vectors(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """n uniform sphere points as the rows of an (n, dim) array."""
    z = rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)
