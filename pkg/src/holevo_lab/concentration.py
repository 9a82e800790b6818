"""Sphere concentration tooling: greedy epsilon-nets, exponential tail
bounds for Lipschitz functions, the chaining union-bound calculator,
stratified layer membership, and empirical sup-variation of functions
over random subspaces.

Net construction is exponential in the dimension, so hard guards fail
loudly instead of silently degrading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import minimize

from . import linalg
from .errors import GuardError, ValidationError
from .rng import RngSeed

NET_MAX_DIM = 4        # complex dimension guard for greedy nets
NET_MIN_EPS = 0.3
SUBSPACE_MAX_DIM = 16  # complex dimension guard for subspace scans


@dataclass(frozen=True)
class EpsNet:
    dim: int
    eps: float
    points: np.ndarray  # (count, dim) complex, unit rows

    @property
    def cardinality_cap(self) -> int:
        return int(math.floor((3.0 / self.eps) ** (2 * self.dim)))

    def covers(self, x: np.ndarray) -> bool:
        dists = np.linalg.norm(self.points - x[None, :], axis=1)
        return bool(dists.min() <= self.eps)

    def covering_audit(self, n_points: int, rng: RngSeed) -> bool:
        """True iff n_points fresh uniform sphere samples all lie within
        eps of the net."""
        gen = rng.generator()
        X = linalg.random_unit_vectors(n_points, self.dim, gen)
        # |x - p|^2 = 2 - 2 Re <x, p>
        overlap = (X.conj() @ self.points.T).real
        d2 = 2.0 - 2.0 * overlap
        return bool(np.max(d2.min(axis=1)) <= self.eps**2 + 1e-12)


def greedy_eps_net(dim: int, eps: float, rng: RngSeed,
                   verify_points: int = 2_000_000) -> EpsNet:
    """Maximal eps-separated subset of the unit sphere of C^dim, built
    greedily from a random stream; maximality makes it an eps-net.

    Candidates farther than eps from the current set are inserted (any
    such point keeps the set eps-separated).  Construction ends only
    after ``verify_points`` consecutive fresh samples all landed within
    eps of the set, which drives the uncovered mass far below what a
    10^4-point covering audit can detect.
    """
    if dim > NET_MAX_DIM:
        raise GuardError(f"greedy nets limited to complex dim <= {NET_MAX_DIM}")
    if eps < NET_MIN_EPS:
        raise GuardError(f"greedy nets limited to eps >= {NET_MIN_EPS}")
    gen = rng.generator()
    points = [linalg.random_unit_vector(dim, gen)]
    arr = np.array(points)
    clean = 0
    eps2 = eps * eps
    batch = 4096
    while clean < verify_points:
        cand = linalg.random_unit_vectors(batch, dim, gen)
        overlap = (cand.conj() @ arr.T).real
        d2 = 2.0 - 2.0 * overlap
        far = d2.min(axis=1) > eps2
        if not far.any():
            clean += batch
            continue
        # insert sequentially: accepted candidates may exclude later ones
        added = False
        for c in cand[far]:
            d2c = 2.0 - 2.0 * (arr.conj() @ c).real
            if d2c.min() > eps2:
                points.append(c)
                arr = np.array(points)
                added = True
        clean = 0 if added else clean + batch
    net = EpsNet(dim, eps, arr)
    if len(points) > net.cardinality_cap:
        raise ValidationError(
            f"net of size {len(points)} exceeds the (3/eps)^(2n) cap "
            f"{net.cardinality_cap}; separation logic is broken")
    return net


def levy_tail_bound(n: int, L: float, lam: float) -> float:
    """2 exp(-n lam^2 / (4 L^2)), clamped to [0, 1]."""
    if n < 1 or L <= 0 or lam <= 0:
        raise ValidationError("levy_tail_bound needs n >= 1, L > 0, lambda > 0")
    return min(1.0, 2.0 * math.exp(-n * lam**2 / (4.0 * L**2)))


def pairwise_tail_bound(n: int, L: float, lam: float, dist: float) -> float:
    """2 exp(-lam^2 n / (8 L^2 dist^2)), clamped to [0, 1]."""
    if n < 1 or L <= 0 or lam <= 0 or dist <= 0:
        raise ValidationError("pairwise_tail_bound needs positive inputs")
    return min(1.0, 2.0 * math.exp(-lam**2 * n / (8.0 * L**2 * dist**2)))


class EmpiricalTail(NamedTuple):
    prob: float
    mean: float
    stderr: float


def empirical_tail(f: Callable[[np.ndarray], float], n: int, lam: float,
                   n_samples: int, rng: RngSeed) -> EmpiricalTail:
    """Monte Carlo Pr(|f - mean| >= lam) under the uniform sphere measure,
    with the mean estimated on an independent half-sample."""
    if n_samples < 1000:
        raise ValidationError("need n_samples >= 1000")
    gen = rng.generator()
    half = n_samples // 2
    ref = np.array([f(linalg.random_unit_vector(n, gen)) for _ in range(half)])
    mean = float(ref.mean())
    vals = np.array([f(linalg.random_unit_vector(n, gen)) for _ in range(n_samples - half)])
    hits = np.abs(vals - mean) >= lam
    prob = float(hits.mean())
    stderr = float(math.sqrt(max(prob * (1.0 - prob), 1.0 / hits.size) / hits.size))
    return EmpiricalTail(prob, mean, stderr)


@dataclass(frozen=True)
class ChainingParams:
    """Inputs of the chaining union bound.

    p_fn must be nondecreasing; net_sizes(i) bounds the cardinality of a
    2^-i net of the index space; C must equal the sum of
    sqrt(|i| p(i)) / 2^i over i > i0 (validated by partial sums).
    """

    L1: float
    lam: float
    radius: float
    C: float
    p_fn: Callable[[int], float]
    net_sizes: Callable[[int], int]

    def i0(self) -> int:
        # radius in (2^(-i0-1), 2^(-i0)]
        if self.radius <= 0:
            raise ValidationError("radius must be positive")
        return int(math.floor(-math.log2(self.radius) + 1e-12))

    def validate_series(self, tol: float = 1e-6, max_terms: int = 2000) -> None:
        i0 = self.i0()
        total = 0.0
        prev = None
        for i in range(i0 + 1, i0 + 1 + max_terms):
            term = math.sqrt(abs(i) * self.p_fn(i)) / 2.0**i
            total += term
            if prev is not None and term < 1e-15 and prev < 1e-15:
                break
            prev = term
        else:
            raise ValidationError("chaining series did not converge within the term budget")
        # geometric tail bound with the observed decay ratio
        if prev and prev > 0 and term > 0:
            ratio = term / prev if prev > 0 else 0.5
            if ratio < 1:
                total += term * ratio / (1 - ratio)
        if abs(total - self.C) > tol:
            raise ValidationError(
                f"series value {total} disagrees with declared C={self.C} beyond {tol}")


class ChainingBound(NamedTuple):
    i0: int
    i1: int
    per_level: list
    total: float


def chaining_bound(cp: ChainingParams,
                   pair_tail: Callable[[int, float], float]) -> ChainingBound:
    """Union-bound aggregate over net levels.

    Level i contributes net_sizes(i-1) * net_sizes(i) * pair_tail(i, thr_i)
    with thr_i = lam * sqrt(|i| p(i)) / (4 C 2^i), summed for
    i0+1 <= i <= i1+1.
    """
    cp.validate_series()
    i0 = cp.i0()
    i1 = max(i0, math.ceil(math.log2(2.0 * cp.L1 / cp.lam)))
    per_level = []
    total = 0.0
    for i in range(i0 + 1, i1 + 2):
        thr = cp.lam * math.sqrt(abs(i) * cp.p_fn(i)) / (4.0 * cp.C * 2.0**i)
        contrib = cp.net_sizes(i - 1) * cp.net_sizes(i) * pair_tail(i, thr)
        per_level.append({"level": i, "threshold": thr, "contribution": contrib})
        total += contrib
    return ChainingBound(i0, i1, per_level, total)


@dataclass(frozen=True)
class LayerSpec:
    """Stratification family and its parameters.

    step2_opnorm: ||M||_inf <= 2 sqrt(j (i+3) / k)
    step2_fro:    ||M M^dag - I/k||_2 <= 2 j (i+3) / k
    renyi_2p:     ||M||_2p <= 2 (i+3)^(1/2) k^(1/(2p) - 1/2)
    """

    k: int
    j: int = 1
    family: str = "step2_opnorm"
    p: float = 1.1

    def __post_init__(self):
        if self.family not in ("step2_opnorm", "step2_fro", "renyi_2p"):
            raise ValidationError(f"unknown layer family {self.family!r}")
        if self.family == "renyi_2p" and self.p <= 1:
            raise ValidationError("renyi_2p family needs p > 1")

    def threshold(self, i: int) -> float:
        if self.family == "step2_opnorm":
            return 2.0 * math.sqrt(self.j * (i + 3) / self.k)
        if self.family == "step2_fro":
            return 2.0 * self.j * (i + 3) / self.k
        return 2.0 * math.sqrt(i + 3) * self.k ** (1.0 / (2 * self.p) - 0.5)


def layer_membership(M: np.ndarray, spec: LayerSpec, i: int) -> bool:
    """Does the unit-Frobenius matrix M fall in layer i of the family?"""
    if abs(np.linalg.norm(M) - 1.0) > 1e-10:
        raise ValidationError("layer membership is defined for unit Frobenius norm")
    thr = spec.threshold(i)
    if spec.family == "step2_opnorm":
        stat = linalg.schatten_norm(M, np.inf)
    elif spec.family == "step2_fro":
        stat = linalg.schatten_norm(M @ M.conj().T - np.eye(spec.k) / spec.k, 2)
    else:
        stat = linalg.schatten_norm(M, 2 * spec.p)
    return bool(stat <= thr)


class SupVariation(NamedTuple):
    sup_dev: float   # lower estimate of the true supremum deviation
    mean_ref: float
    mean_stderr: float


def subspace_sup_variation(f: Callable[[np.ndarray], float], basis: np.ndarray,
                           eps: float, rng: RngSeed,
                           n_mean_samples: int = 2000,
                           n_scan: int | None = None,
                           polish_starts: int = 10) -> SupVariation:
    """Largest observed |f - Haar mean| over the unit sphere of a subspace.

    basis has orthonormal columns spanning the subspace inside C^n.  The
    scan covers a random candidate set of the subspace sphere plus
    Nelder-Mead polish from the best points; the result is a certified
    lower estimate of the supremum (any feasible point is).
    """
    n, sub_dim = basis.shape
    if sub_dim > SUBSPACE_MAX_DIM:
        raise GuardError(f"subspace scans limited to complex dim <= {SUBSPACE_MAX_DIM}")
    if eps < NET_MIN_EPS:
        raise GuardError(f"subspace scans limited to eps >= {NET_MIN_EPS}")
    gen = rng.generator()
    ref = np.array([f(linalg.random_unit_vector(n, gen)) for _ in range(n_mean_samples)])
    mean_ref = float(ref.mean())
    mean_stderr = float(ref.std(ddof=1) / math.sqrt(n_mean_samples))

    if n_scan is None:
        n_scan = max(2000, int(math.ceil((3.0 / eps) ** (2 * min(sub_dim, 4)))))
    coords = linalg.random_unit_vectors(n_scan, sub_dim, gen)
    devs = np.array([abs(f(basis @ c) - mean_ref) for c in coords])
    order = np.argsort(devs)[::-1]
    sup_dev = float(devs[order[0]])

    def neg_dev(z_real: np.ndarray) -> float:
        z = z_real[:sub_dim] + 1j * z_real[sub_dim:]
        nz = np.linalg.norm(z)
        if nz < 1e-12:
            return 0.0
        return -abs(f(basis @ (z / nz)) - mean_ref)

    for idx in order[:polish_starts]:
        z0 = coords[idx]
        x0 = np.concatenate([z0.real, z0.imag])
        res = minimize(neg_dev, x0, method="Nelder-Mead",
                       options={"maxiter": 200 * sub_dim, "xatol": 1e-6, "fatol": 1e-9})
        sup_dev = max(sup_dev, float(-res.fun))
    return SupVariation(sup_dev, mean_ref, mean_stderr)
