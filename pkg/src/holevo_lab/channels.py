"""Quantum channels described by subspaces of C^k (x) C^d.

A channel is carried by an isometry V: C^m -> C^k (x) C^d; applying it
means conjugating by V and tracing out the d-dimensional environment.
Min-output entropies and 1->p norms are estimated by multi-start
projected gradient ascent over the input sphere; every returned number
is labeled with the bound direction it certifies (any feasible point
gives a lower bound on a max, hence an upper bound on a min entropy).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import linalg
from .errors import ShapeError, ValidationError
from .linalg import DEFAULT_LOG_BASE
from .rng import RngSeed

ISOMETRY_TOL = 1e-10


@dataclass(frozen=True)
class SubspaceChannel:
    """Channel Tr_env(V rho V^dag) for an isometry V with orthonormal
    columns spanning an m-dimensional subspace of C^k (x) C^d."""

    k: int
    d: int
    m: int
    V: np.ndarray

    def __post_init__(self):
        V = np.asarray(self.V, dtype=complex)
        if V.shape != (self.k * self.d, self.m):
            raise ShapeError(f"isometry must be {(self.k * self.d, self.m)}, got {V.shape}")
        if self.m > self.k * self.d:
            raise ValidationError("input dimension m cannot exceed k*d")
        gram = V.conj().T @ V
        if np.max(np.abs(gram - np.eye(self.m))) > ISOMETRY_TOL:
            raise ValidationError("columns of V are not orthonormal within 1e-10")
        object.__setattr__(self, "V", V)


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 8
    max_iters: int = 300
    step_init: float = 0.5
    grad_tol: float = 1e-9
    rng: RngSeed = RngSeed(0)

    def __post_init__(self):
        if self.restarts < 1:
            raise ValidationError("restarts must be >= 1")
        if self.grad_tol <= 0:
            raise ValidationError("grad_tol must be positive")


def channel_from_unitary(U, k: int, d: int, m: int) -> SubspaceChannel:
    """Channel whose subspace is the span of the first m columns of U."""
    U = np.asarray(U, dtype=complex)
    n = k * d
    if U.shape != (n, n):
        raise ShapeError(f"unitary must be {n}x{n}, got {U.shape}")
    if np.max(np.abs(U.conj().T @ U - np.eye(n))) > ISOMETRY_TOL:
        raise ValidationError("U is not unitary within 1e-10")
    return SubspaceChannel(k, d, m, U[:, :m].copy())


def apply(ch: SubspaceChannel, rho) -> np.ndarray:
    """Channel output Tr_env(V rho V^dag) on C^k."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (ch.m, ch.m):
        raise ShapeError(f"input state must be {ch.m}x{ch.m}, got {rho.shape}")
    big = ch.V @ rho @ ch.V.conj().T
    return linalg.partial_trace_second(big, ch.k, ch.d)


def apply_pure(ch: SubspaceChannel, x) -> np.ndarray:
    """Output on the pure input |x><x| via the reshaped isometry image."""
    x = np.asarray(x, dtype=complex).ravel()
    A = linalg.op_reshape(ch.V @ x, ch.k, ch.d)
    return A @ A.conj().T


def conjugate_channel(ch: SubspaceChannel) -> SubspaceChannel:
    return SubspaceChannel(ch.k, ch.d, ch.m, ch.V.conj())


# ---------------------------------------------------------------------------
# objectives on the input sphere (Wirtinger convention: the returned
# complex array g encodes the real gradient as [2 Re g; 2 Im g])
# ---------------------------------------------------------------------------

def _psd_power(rho: np.ndarray, alpha: float) -> np.ndarray:
    evals, vecs = np.linalg.eigh(rho)
    evals = np.clip(evals, 0.0, None)
    return (vecs * evals**alpha) @ vecs.conj().T


def f2_value_grad(ch: SubspaceChannel, x: np.ndarray):
    """Value and conjugate cogradient of x -> ||op(Vx) op(Vx)^dag - I/k||_2^2."""
    A = linalg.op_reshape(ch.V @ x, ch.k, ch.d)
    D = A @ A.conj().T - np.eye(ch.k) / ch.k
    val = float(np.sum(np.abs(D) ** 2))
    grad = ch.V.conj().T @ (2.0 * D @ A).ravel()
    return val, grad


def trace_power_value_grad(ch: SubspaceChannel, x: np.ndarray, p: float):
    """Value and conjugate cogradient of x -> Tr[(op(Vx) op(Vx)^dag)^p]."""
    A = linalg.op_reshape(ch.V @ x, ch.k, ch.d)
    rho = A @ A.conj().T
    evals = np.clip(np.linalg.eigvalsh(rho), 0.0, None)
    val = float(np.sum(evals**p))
    grad = ch.V.conj().T @ (p * _psd_power(rho, p - 1.0) @ A).ravel()
    return val, grad


def neg_entropy_value_grad(ch: SubspaceChannel, x: np.ndarray,
                           base: float = DEFAULT_LOG_BASE):
    """Value and conjugate cogradient of x -> -S(op(Vx) op(Vx)^dag)."""
    A = linalg.op_reshape(ch.V @ x, ch.k, ch.d)
    rho = A @ A.conj().T
    evals, vecs = np.linalg.eigh(rho)
    evals = np.clip(evals, 0.0, None)
    safe = np.where(evals > linalg.LOG_CLAMP, evals, 1.0)
    logs = np.log(safe)
    val = float(np.sum(evals * logs) / math.log(base))
    logrho_plus = (vecs * (logs + 1.0)) @ vecs.conj().T
    grad = ch.V.conj().T @ ((logrho_plus / math.log(base)) @ A).ravel()
    return val, grad


class SphereMaxResult(NamedTuple):
    value: float
    argmax: np.ndarray
    converged: bool


def _project_tangent(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    return g - (x.conj() @ g) * x


def maximize_on_sphere(value_grad: Callable, m: int, cfg: OptimizerConfig,
                       starts: list | None = None) -> SphereMaxResult:
    """Multi-start projected gradient ascent on the unit sphere of C^m.

    Restart r draws its start from stream (cfg.rng.stream_id + r), so
    increasing ``restarts`` only appends candidates: the best value is
    monotone in the restart count for a fixed seed.
    """
    best_val, best_x, best_conv = -np.inf, None, False
    for r in range(cfg.restarts):
        if starts is not None and r < len(starts):
            x = np.asarray(starts[r], dtype=complex)
            x = x / np.linalg.norm(x)
        else:
            gen = cfg.rng.with_stream(cfg.rng.stream_id + r).generator()
            x = linalg.random_unit_vector(m, gen)
        val, grad = value_grad(x)
        step = cfg.step_init
        converged = False
        for _ in range(cfg.max_iters):
            tang = _project_tangent(x, grad)
            gnorm = np.linalg.norm(tang)
            if gnorm <= cfg.grad_tol:
                converged = True
                break
            # backtracking line search on the retraction
            improved = False
            while step > 1e-14:
                cand = x + step * tang
                cand = cand / np.linalg.norm(cand)
                cand_val, cand_grad = value_grad(cand)
                if cand_val > val + 1e-4 * step * gnorm**2:
                    x, val, grad = cand, cand_val, cand_grad
                    step = min(step * 2.0, 1e3)
                    improved = True
                    break
                step *= 0.5
            if not improved:
                converged = True
                break
        if val > best_val:
            best_val, best_x, best_conv = val, x, converged
    return SphereMaxResult(best_val, best_x, best_conv)


class NormEstimate(NamedTuple):
    value: float       # certified LOWER bound on ||Phi||_{1->p}
    argmax: np.ndarray
    converged: bool


def one_to_p_norm_estimate(ch: SubspaceChannel, p: float,
                           cfg: OptimizerConfig) -> NormEstimate:
    """Best found ||op(Vx)||_{2p}^2 over unit x; a lower bound on the
    1->p superoperator norm since every feasible point is."""
    if p <= 1:
        raise ValidationError("one_to_p_norm_estimate requires p > 1")
    if ch.m == 1:
        x = np.zeros(ch.m, dtype=complex)
        x[0] = 1.0
        val, _ = trace_power_value_grad(ch, x, p)
        return NormEstimate(val ** (1.0 / p), x, True)
    res = maximize_on_sphere(lambda x: trace_power_value_grad(ch, x, p), ch.m, cfg)
    return NormEstimate(res.value ** (1.0 / p), res.argmax, res.converged)


class EntropyEstimate(NamedTuple):
    entropy: float     # certified UPPER bound on S_p^min(Phi)
    argmin: np.ndarray
    converged: bool


def min_output_entropy_estimate(ch: SubspaceChannel, p: float,
                                cfg: OptimizerConfig,
                                base: float = DEFAULT_LOG_BASE) -> EntropyEstimate:
    """Best found S_p of a pure-input output; an upper bound on S_p^min."""
    if p < 1:
        raise ValidationError("requires p >= 1")
    if ch.m == 1:
        x = np.zeros(ch.m, dtype=complex)
        x[0] = 1.0
        rho = apply_pure(ch, x)
        return EntropyEstimate(linalg.output_entropy(rho / np.trace(rho).real, p, base), x, True)
    if p == 1:
        res = maximize_on_sphere(lambda x: neg_entropy_value_grad(ch, x, base), ch.m, cfg)
        return EntropyEstimate(-res.value, res.argmax, res.converged)
    res = maximize_on_sphere(lambda x: trace_power_value_grad(ch, x, p), ch.m, cfg)
    # S_p = (1/(1-p)) log Tr rho^p with Tr rho^p maximal
    entropy = math.log(res.value) / ((1.0 - p) * math.log(base))
    return EntropyEstimate(entropy, res.argmax, res.converged)


class AswBound(NamedTuple):
    bound: float       # log k - k * max_f2; UPPER estimate of the true bound
    max_f2: float      # lower estimate of the true maximum
    converged: bool


def asw_lower_bound(ch: SubspaceChannel, cfg: OptimizerConfig,
                    base: float = DEFAULT_LOG_BASE) -> AswBound:
    """Evaluate log k - k * max_x ||op(Vx)op(Vx)^dag - I/k||_2^2 with the
    maximum replaced by its best found value.  Since the inner maximum is
    only a lower estimate, the returned bound is an upper estimate of the
    exact expression."""
    res = maximize_on_sphere(lambda x: f2_value_grad(ch, x), ch.m, cfg)
    bound = math.log(ch.k) / math.log(base) - ch.k * res.value
    return AswBound(bound, res.value, res.converged)


class HaydenWinterCertificate(NamedTuple):
    lambda_max: float
    threshold: float          # m / (k d); theorem guarantees lambda_max >= this
    s_min_upper: float        # S_p at the maximally entangled input
    norm_lower: float         # lambda_max, lower bound on ||Phi x conj(Phi)||_{1->p}
    m_le_d: bool              # hypothesis of the entropy-side bound


def product_channel_entangled_output(ch: SubspaceChannel) -> np.ndarray:
    """(Phi x conj(Phi)) applied to the maximally entangled state
    (1/sqrt m) sum_i |ii> on C^m (x) C^m, as a k^2 x k^2 matrix."""
    k, d, m = ch.k, ch.d, ch.m
    # psi = (V x conj(V)) |phi> assembled column by column
    cols = ch.V.T.reshape(m, k, d)            # cols[s] = op(V e_s)
    psi = np.einsum("sia,sjb->iajb", cols, cols.conj()) / math.sqrt(m)
    rho = np.einsum("iajb,kalb->ijkl", psi, psi.conj())
    return rho.reshape(k * k, k * k)


def hayden_winter_certificate(ch: SubspaceChannel, p: float = 1.0,
                              base: float = DEFAULT_LOG_BASE) -> HaydenWinterCertificate:
    """Largest eigenvalue of (Phi x conj(Phi)) at the maximally entangled
    input, with the m/(kd) floor it must not go below.

    The eigenvalue floor holds for any m <= k*d; m <= d is only needed
    by the entropy-side asymptotic and is reported as a flag.
    """
    if ch.k > 8:
        raise ValidationError("certificate supported for k <= 8 (k^2 x k^2 output)")
    rho = product_channel_entangled_output(ch)
    evals = np.linalg.eigvalsh(rho)
    lam = float(evals[-1])
    rho = rho / np.trace(rho).real  # renormalize away float drift before S_p
    s_val = linalg.output_entropy(linalg.check_density_matrix(rho), p, base)
    return HaydenWinterCertificate(lam, ch.m / (ch.k * ch.d), s_val, lam,
                                   ch.m <= ch.d)


def additivity_gap_report(ch: SubspaceChannel, p: float, cfg: OptimizerConfig,
                          certified_rhs_lower: float | None = None,
                          base: float = DEFAULT_LOG_BASE) -> dict:
    """Two-sided comparison of S_min(Phi x conj(Phi)) against 2 S_min(Phi).

    Both sides are bounds in the favorable direction: lhs_upper bounds
    the product-channel min entropy from above, rhs uses upper estimates
    of the single-copy min entropy.  A violation is only claimed when
    lhs_upper < 2 * (a certified lower bound), which must come from the
    tiny-dimension grid oracle and is passed in explicitly.
    """
    cert = hayden_winter_certificate(ch, p, base)
    est = min_output_entropy_estimate(ch, p, cfg, base)
    rhs = 2.0 * est.entropy
    # product inputs are admissible for the product channel, so rhs is
    # itself an upper bound on the lhs; the entangled-input value can
    # only tighten it
    lhs_upper = min(cert.s_min_upper, rhs)
    gap = lhs_upper - rhs
    violation = (certified_rhs_lower is not None
                 and cert.s_min_upper < 2.0 * certified_rhs_lower)
    return {
        "k": ch.k, "d": ch.d, "m": ch.m, "p": p, "log_base": base,
        "lhs_upper": lhs_upper,
        "lhs_direction": "upper bound on S_min(product channel)",
        "entangled_input_entropy": cert.s_min_upper,
        "rhs": rhs,
        "rhs_direction": "2x upper estimate of S_min(single channel)",
        "gap": gap,
        "gap_direction": "lhs_upper minus rhs; <= 0 unless a violation is certified",
        "lambda_max": cert.lambda_max,
        "lambda_threshold": cert.threshold,
        "violation_claimed": bool(violation),
    }


# ---------------------------------------------------------------------------
# brute-force certification grid (tiny input dimensions only)
# ---------------------------------------------------------------------------

def _batched_output_entropies(ch: SubspaceChannel, X: np.ndarray, p: float,
                              base: float) -> np.ndarray:
    """S_p of the outputs for pure inputs given as rows of X."""
    n = X.shape[0]
    A = (ch.V @ X.T).T.reshape(n, ch.k, ch.d)
    rho = A @ A.conj().transpose(0, 2, 1)
    if ch.k == 2:
        tr = np.einsum("nii->n", rho).real
        det = (rho[:, 0, 0] * rho[:, 1, 1] - rho[:, 0, 1] * rho[:, 1, 0]).real
        disc = np.sqrt(np.clip(tr**2 / 4.0 - det, 0.0, None))
        evals = np.stack([tr / 2.0 - disc, tr / 2.0 + disc], axis=1)
    else:
        evals = np.linalg.eigvalsh(rho)
    evals = np.clip(evals, 0.0, None)
    if p == 1:
        safe = np.where(evals > linalg.LOG_CLAMP, evals, 1.0)
        return -np.sum(evals * np.log(safe), axis=1) / math.log(base)
    return np.log(np.sum(evals**p, axis=1)) / ((1.0 - p) * math.log(base))


def grid_min_output_entropy(ch: SubspaceChannel, p: float, n_points: int,
                            rng: RngSeed, polish: bool = True,
                            base: float = DEFAULT_LOG_BASE) -> EntropyEstimate:
    """Uniform sphere scan of S_p over pure inputs plus local polish.

    Intended as an independent oracle at tiny m (real dimension <= 4).
    """
    gen = rng.generator()
    best_val, best_x = np.inf, None
    for start in range(0, n_points, 200_000):
        chunk = min(200_000, n_points - start)
        X = linalg.random_unit_vectors(chunk, ch.m, gen)
        vals = _batched_output_entropies(ch, X, p, base)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best_x = float(vals[i]), X[i]
    if polish:
        cfg = OptimizerConfig(restarts=1, max_iters=500, rng=rng)
        if p == 1:
            res = maximize_on_sphere(lambda x: neg_entropy_value_grad(ch, x, base),
                                     ch.m, cfg, starts=[best_x])
            pol_val, pol_x = -res.value, res.argmax
        else:
            res = maximize_on_sphere(lambda x: trace_power_value_grad(ch, x, p),
                                     ch.m, cfg, starts=[best_x])
            pol_val = math.log(res.value) / ((1.0 - p) * math.log(base))
            pol_x = res.argmax
        if pol_val < best_val:
            best_val, best_x = pol_val, pol_x
    return EntropyEstimate(best_val, best_x, True)
