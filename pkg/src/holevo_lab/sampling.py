"""Haar-random unitaries, brickwork random circuits, and exact
low-moment oracles for certifying design quality.

Haar sampling uses the complex Ginibre + QR construction with the
mandatory phase correction of the R diagonal; without it the QR output
is not left-invariant.  Exact moments are available for balanced
monomials of degree t <= 2 via the second-order Weingarten
coefficients; the frame potential serves as an aggregate diagnostic
beyond that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import UnsupportedDegreeError, ValidationError
from .rng import RngSeed

UNITARITY_TOL = 1e-10


def sample_haar(dim: int, rng: RngSeed | np.random.Generator) -> np.ndarray:
    """Haar-random unitary of size dim x dim."""
    if dim < 1:
        raise ValidationError("dim must be >= 1")
    gen = rng.generator() if isinstance(rng, RngSeed) else rng
    z = (gen.standard_normal((dim, dim)) + 1j * gen.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    phases = diag / np.abs(diag)
    return q * phases


def _embed_two_qubit_gate(gate: np.ndarray, pair: int, q: int) -> np.ndarray:
    """Lift a 4x4 gate acting on qubits (pair, pair+1) to 2^q dims."""
    dim = 2**pair
    left = np.eye(dim) if pair > 0 else None
    right_dim = 2 ** (q - pair - 2)
    op = gate
    if left is not None:
        op = np.kron(left, op)
    if right_dim > 1:
        op = np.kron(op, np.eye(right_dim))
    return op


def sample_brickwork(dim: int, depth: int, rng: RngSeed | np.random.Generator) -> np.ndarray:
    """Product of ``depth`` layers of independent Haar 4x4 gates laid on
    alternating even/odd nearest-neighbour qubit pairs."""
    q = int(round(math.log2(dim)))
    if 2**q != dim:
        raise ValidationError(f"brickwork needs dim a power of two, got {dim}")
    if q < 2:
        raise ValidationError("brickwork needs at least 2 qubits")
    if depth < 1:
        raise ValidationError("depth must be >= 1")
    gen = rng.generator() if isinstance(rng, RngSeed) else rng
    U = np.eye(dim, dtype=complex)
    for layer in range(depth):
        start = 0 if layer % 2 == 0 else 1
        L = np.eye(dim, dtype=complex)
        for pair in range(start, q - 1, 2):
            gate = sample_haar(4, gen)
            L = _embed_two_qubit_gate(gate, pair, q) @ L
        U = L @ U
    return U


@dataclass(frozen=True)
class DesignSampler:
    """Immutable configuration of a unitary ensemble.

    mode is "haar" or "brickwork"; depth applies to brickwork only;
    target_t is declared intent recorded in reports, not enforced.
    """

    dim: int
    mode: str = "haar"
    depth: int = 1
    target_t: int = 1

    def __post_init__(self):
        if self.mode not in ("haar", "brickwork"):
            raise ValidationError(f"unknown sampler mode {self.mode!r}")
        if self.mode == "brickwork":
            q = int(round(math.log2(self.dim)))
            if 2**q != self.dim:
                raise ValidationError("brickwork sampler needs dim = 2^q")

    def sample(self, rng: RngSeed | np.random.Generator) -> np.ndarray:
        if self.mode == "haar":
            return sample_haar(self.dim, rng)
        return sample_brickwork(self.dim, self.depth, rng)


@dataclass(frozen=True)
class BalancedMonomial:
    """Product of t conjugated and t unconjugated unitary entries."""

    conjugated: tuple
    unconjugated: tuple

    def __post_init__(self):
        c = tuple(tuple(ij) for ij in self.conjugated)
        u = tuple(tuple(ij) for ij in self.unconjugated)
        if len(c) != len(u):
            raise ValidationError("balanced monomial needs equally many conjugated "
                                  "and unconjugated entries")
        object.__setattr__(self, "conjugated", c)
        object.__setattr__(self, "unconjugated", u)

    @property
    def degree(self) -> int:
        return len(self.conjugated)

    def evaluate(self, U: np.ndarray) -> complex:
        val = 1.0 + 0j
        for (i, j) in self.unconjugated:
            val *= U[i, j]
        for (i, j) in self.conjugated:
            val *= np.conj(U[i, j])
        return val


def haar_moment_exact(monomial: BalancedMonomial, dim: int) -> complex:
    """Exact Haar expectation of a balanced monomial, degree t in {1, 2}.

    t=1 is the delta/d rule; t=2 sums Weingarten coefficients
    1/(d^2-1) and -1/(d(d^2-1)) over the four permutation pairs.
    """
    if dim < 2:
        raise ValidationError("dim must be >= 2")
    t = monomial.degree
    if t == 0:
        return 1.0 + 0j
    if t == 1:
        (i, j), = monomial.unconjugated
        (ic, jc), = monomial.conjugated
        return (1.0 / dim) if (i == ic and j == jc) else 0.0
    if t == 2:
        d = dim
        wg_id = 1.0 / (d**2 - 1)
        wg_swap = -1.0 / (d * (d**2 - 1))
        (i1, j1), (i2, j2) = monomial.unconjugated
        (i1c, j1c), (i2c, j2c) = monomial.conjugated
        rows = [(i1c, i2c), (i2c, i1c)]  # sigma = id, swap
        cols = [(j1c, j2c), (j2c, j1c)]  # tau = id, swap
        total = 0.0
        for si, (r1, r2) in enumerate(rows):
            if not (i1 == r1 and i2 == r2):
                continue
            for ti, (c1, c2) in enumerate(cols):
                if not (j1 == c1 and j2 == c2):
                    continue
                total += wg_id if si == ti else wg_swap
        return total
    raise UnsupportedDegreeError(f"exact Haar moments implemented for t <= 2, got t={t}")


class MomentDeviation(NamedTuple):
    estimate: complex
    haar_value: complex
    deviation: float
    mc_stderr: float
    certificate_threshold: float | None


def design_moment_deviation(sampler: DesignSampler, monomial: BalancedMonomial,
                            n_samples: int, rng: RngSeed,
                            eps: float | None = None) -> MomentDeviation:
    """Monte Carlo moment of the ensemble against the exact Haar value.

    When ``eps`` is given, the approximate-design certificate threshold
    eps / dim^t is reported alongside the observed deviation.
    """
    if n_samples < 100:
        raise ValidationError("need n_samples >= 100")
    haar_value = haar_moment_exact(monomial, sampler.dim)
    gen = rng.generator()
    vals = np.empty(n_samples, dtype=complex)
    for s in range(n_samples):
        vals[s] = monomial.evaluate(sampler.sample(gen))
    estimate = complex(vals.mean())
    # stderr of the complex mean, conservatively via |.| spread
    stderr = float(np.std(np.abs(vals - estimate)) / math.sqrt(n_samples))
    deviation = abs(estimate - haar_value)
    threshold = None if eps is None else eps / sampler.dim**monomial.degree
    return MomentDeviation(estimate, complex(haar_value), deviation, stderr, threshold)


class FramePotential(NamedTuple):
    estimate: float
    haar_value: float
    mc_stderr: float


def frame_potential(sampler: DesignSampler, t: int, n_pairs: int,
                    rng: RngSeed) -> FramePotential:
    """Monte Carlo estimate of E |Tr(U^dag V)|^(2t) over independent pairs.

    The Haar limit is t! for dim >= t; larger values indicate the
    ensemble is further from a t-design.
    """
    if t not in (1, 2, 3):
        raise ValidationError("frame potential supported for t in {1,2,3}")
    if n_pairs < 1000:
        raise ValidationError("need n_pairs >= 1000")
    gen = rng.generator()
    vals = np.empty(n_pairs)
    for s in range(n_pairs):
        U = sampler.sample(gen)
        V = sampler.sample(gen)
        vals[s] = abs(np.trace(U.conj().T @ V)) ** (2 * t)
    estimate = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(n_pairs))
    return FramePotential(estimate, float(math.factorial(t)), stderr)
