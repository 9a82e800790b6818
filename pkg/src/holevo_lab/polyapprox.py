"""Arbitrary-precision polynomial approximation of monotone functions.

The central object is the truncated Maclaurin series of the Gaussian
sigmoid 1/2 + erf(x)/2, rescaled and shifted to build a staircase
approximant of any increasing surjection f : [0, A] -> [0, 1].  The
construction trades approximation accuracy eps against the polynomial
degree and against the coefficient blow-up alpha (the l1 norm of the
coefficient vector), which in turn dictates the mantissa size needed
to survive cancellation.

Arithmetic is gmpy2/MPFR.  Every routine that touches coefficients runs
under an explicit context of ``precision_bits`` mantissa bits.  Dense
coefficients of a built approximant can exceed the stated precision's
dynamic cancellation budget, so built polynomials carry a structured
form (a weighted sum of shifted sigmoid series) and point evaluation
goes through it: its cancellation scale is e^(y^2) at series argument
y, which the builder's precision check already accounts for.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .errors import PrecisionError, ValidationError

MIN_PRECISION_BITS = 64
DEFAULT_PRECISION_BITS = 256
# extra mantissa bits beyond the cancellation scale (m A)^2 / ln 2
PRECISION_HEADROOM = 64
BISECTION_TOL = 1e-12

SCHEMA_VERSION = 1


def _ctx(precision_bits: int):
    return gmpy2.context(precision=precision_bits)


def _mpfr_str(x: mpfr) -> str:
    digs, exp, _ = x.digits(10)
    sign = ""
    if digs.startswith("-"):
        sign, digs = "-", digs[1:]
    if digs == "0":
        return "0"
    return f"{sign}0.{digs}e{exp}"


def heaviside(x: float) -> float:
    """Unit step with the symmetric midpoint convention H(0) = 1/2."""
    if x > 0:
        return 1.0
    if x < 0:
        return 0.0
    return 0.5


def sigmoid(x, precision_bits: int = DEFAULT_PRECISION_BITS) -> mpfr:
    """Gaussian sigmoid 1/2 + erf(x)/2 at the requested precision."""
    _check_precision(precision_bits)
    with _ctx(precision_bits):
        return mpfr(1) / 2 + gmpy2.erf(mpfr(x)) / 2


def _check_precision(precision_bits: int) -> None:
    if not isinstance(precision_bits, int) or precision_bits < MIN_PRECISION_BITS:
        raise PrecisionError(f"precision_bits must be an int >= {MIN_PRECISION_BITS}, "
                             f"got {precision_bits!r}")


@dataclass(frozen=True)
class StructuredForm:
    """Weighted sum of shifted/scaled sigmoid series.

    Represents weight * sum_t d^order/dx^order p_n(m_t (x - q_t)) where
    p_n is the truncated sigmoid Maclaurin series of odd index n.
    Evaluating through this form needs only ~ (max_t m_t |x - q_t|)^2
    cancellation bits, far below the l1 scale of the dense coefficients.
    """

    weight: mpfr
    n: int
    terms: tuple  # ((m_t, q_t) mpfr pairs)
    order: int = 0  # 0 = value, 1 = first derivative


@dataclass(frozen=True)
class Poly:
    """Immutable polynomial with MPFR coefficients in ascending order.

    Coefficients are canonical: the trailing coefficient is nonzero
    unless the polynomial is the zero constant.  ``structure``, when
    present, is a numerically stable evaluation recipe for the same
    polynomial; the dense coefficients remain authoritative for degree,
    alpha and serialization.
    """

    coeffs: tuple
    precision_bits: int
    structure: StructuredForm | None = None

    def __post_init__(self):
        _check_precision(self.precision_bits)
        with _ctx(self.precision_bits):
            cs = [mpfr(c) for c in self.coeffs]
        for c in cs:
            if not gmpy2.is_finite(c):
                raise PrecisionError("non-finite coefficient: the value overflowed "
                                     "the floating-point exponent range")
        while len(cs) > 1 and cs[-1] == 0:
            cs.pop()
        object.__setattr__(self, "coeffs", tuple(cs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @cached_property
    def alpha(self) -> mpfr:
        """l1 norm of the coefficient vector."""
        with _ctx(self.precision_bits):
            return sum((abs(c) for c in self.coeffs), mpfr(0))

    @cached_property
    def log_alpha(self) -> float:
        """Natural log of alpha, safe for alphas beyond float range."""
        with _ctx(self.precision_bits):
            a = self.alpha
            return float(gmpy2.log(a)) if a > 0 else -math.inf

    @cached_property
    def _series_coeffs(self):
        """Horner tables for the structured form, as polynomials in y^2.

        p_n(y) = 1/2 + (y/sqrt(pi)) * sum_i (-1)^i u^i / (i! (2i+1)),
        p_n'(y) = (1/sqrt(pi)) * sum_i (-1)^i u^i / i!,  u = y^2.
        """
        st = self.structure
        with _ctx(self.precision_bits):
            inv_sqrt_pi = 1 / gmpy2.sqrt(gmpy2.const_pi())
            fact = mpfr(1)
            val_c, der_c = [], []
            for i in range(st.n + 1):
                if i > 0:
                    fact *= i
                sign = -1 if i % 2 else 1
                val_c.append(sign * inv_sqrt_pi / (fact * (2 * i + 1)))
                der_c.append(sign * inv_sqrt_pi / fact)
            return tuple(val_c), tuple(der_c)

    def _evaluate_structured(self, x: mpfr) -> mpfr:
        st = self.structure
        val_c, der_c = self._series_coeffs
        half = mpfr(1) / 2
        total = mpfr(0)
        for (m_t, q_t) in st.terms:
            y = m_t * (x - q_t)
            u = y * y
            if st.order == 0:
                acc = mpfr(0)
                for c in reversed(val_c):
                    acc = acc * u + c
                total += half + y * acc
            else:
                acc = mpfr(0)
                for c in reversed(der_c):
                    acc = acc * u + c
                total += m_t * acc
        return st.weight * total

    def evaluate(self, x) -> mpfr:
        """Value at x, computed at this polynomial's precision."""
        with _ctx(self.precision_bits):
            xm = mpfr(x)
            if self.structure is not None:
                return self._evaluate_structured(xm)
            acc = mpfr(0)
            for c in reversed(self.coeffs):
                acc = acc * xm + c
            return acc

    def evaluate_many(self, xs) -> list:
        return [self.evaluate(x) for x in xs]

    def derivative(self) -> "Poly":
        """First derivative; the structured recipe survives one order."""
        with _ctx(self.precision_bits):
            dcs = [j * c for j, c in enumerate(self.coeffs)][1:] or [mpfr(0)]
        st = self.structure
        dst = None
        if st is not None and st.order == 0:
            dst = StructuredForm(st.weight, st.n, st.terms, order=1)
        return Poly(tuple(dcs), self.precision_bits, structure=dst)

    def to_json(self) -> str:
        """Serialize degree, precision and decimal coefficient strings.

        The structured evaluation recipe is not serialized; a
        round-tripped polynomial evaluates through its dense
        coefficients.
        """
        return json.dumps({
            "schema_version": SCHEMA_VERSION,
            "degree": self.degree,
            "precision_bits": self.precision_bits,
            "coeffs": [_mpfr_str(c) for c in self.coeffs],
        })

    @classmethod
    def from_json(cls, text: str) -> "Poly":
        data = json.loads(text)
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValidationError(f"unsupported schema_version {data.get('schema_version')!r}")
        bits = data["precision_bits"]
        _check_precision(bits)
        with _ctx(bits):
            coeffs = tuple(mpfr(s) for s in data["coeffs"])
        poly = cls(coeffs, bits)
        if poly.degree != data["degree"]:
            raise ValidationError("degree field disagrees with the coefficient list")
        return poly


def truncated_maclaurin(n: int, precision_bits: int = DEFAULT_PRECISION_BITS) -> Poly:
    """Degree-(2n+1) truncation of the sigmoid series 1/2 + erf(x)/2.

    Coefficients: 1/2 at degree 0 and (-1)^i / (sqrt(pi) i! (2i+1)) at
    degree 2i+1 for 0 <= i <= n.  The index must be odd: odd n makes
    the truncation a lower bound of the sigmoid on (0, sqrt(n)].
    """
    if n < 1 or n % 2 == 0:
        raise ValidationError(f"series index n must be odd and >= 1, got {n}")
    _check_precision(precision_bits)
    with _ctx(precision_bits):
        inv_sqrt_pi = 1 / gmpy2.sqrt(gmpy2.const_pi())
        coeffs = [mpfr(0)] * (2 * n + 2)
        coeffs[0] = mpfr(1) / 2
        fact = mpfr(1)
        for i in range(n + 1):
            if i > 0:
                fact *= i
            sign = -1 if i % 2 else 1
            coeffs[2 * i + 1] = sign * inv_sqrt_pi / (fact * (2 * i + 1))
    return Poly(tuple(coeffs), precision_bits)


def alpha(poly: Poly) -> mpfr:
    """l1 norm of the coefficient vector; bounds |p(z)| on |z| <= 1."""
    return poly.alpha


def compose_affine(poly: Poly, m, q) -> Poly:
    """Coefficients of x -> poly(m (x - q)) via a Horner/Taylor shift.

    Cost is O(degree^2) MPFR operations at the polynomial's precision.
    The result keeps no structured form of its own.
    """
    with _ctx(poly.precision_bits):
        mm, qm = mpfr(m), mpfr(q)
        # scale first: b_j = a_j m^j
        scaled = []
        power = mpfr(1)
        for a in poly.coeffs:
            scaled.append(a * power)
            power *= mm
        # Horner shift: r(x) = r(x) * (x - q) + b_j, highest degree first
        res = [scaled[-1]]
        for b in reversed(scaled[:-1]):
            res.append(mpfr(0))
            for j in range(len(res) - 1, 0, -1):
                res[j] = res[j - 1] - qm * res[j]
            res[0] = b - qm * res[0]
    return Poly(tuple(res), poly.precision_bits)


@dataclass(frozen=True)
class MonotoneSpec:
    """An increasing surjection f : [0, A] -> [0, 1] and its regularity.

    L is a global Lipschitz constant of f on [0, A].  local_lipschitz
    maps (x, e) to a Lipschitz constant of f valid on the whole
    preimage f^{-1}((f(x) - e, f(x) + e)); it must never exceed L.
    """

    f: Callable[[float], float]
    A: float
    L: float
    eps: float
    local_lipschitz: Callable[[float, float], float]
    name: str = ""

    def __post_init__(self):
        if not (self.A > 0 and self.L > 0):
            raise ValidationError("MonotoneSpec needs A > 0 and L > 0")
        if not (0 < self.eps < 1):
            raise ValidationError("MonotoneSpec needs eps in (0, 1)")
        if abs(self.f(0.0)) > 1e-9 or abs(self.f(self.A) - 1.0) > 1e-9:
            raise ValidationError("f must map [0, A] onto [0, 1]: need f(0)=0, f(A)=1")
        grid = np.linspace(0.0, self.A, 64)
        vals = [self.f(float(x)) for x in grid]
        if any(b < a - 1e-12 for a, b in zip(vals, vals[1:])):
            raise ValidationError("f must be nondecreasing on [0, A]")


def required_precision_bits(m: float, A: float) -> int:
    """Mantissa bits needed to evaluate the shifted series stably.

    The alternating sigmoid series at argument y cancels down from
    terms of size ~ e^(y^2), so ~ y^2 / ln 2 bits vanish; the worst
    argument in a build is m * A.
    """
    return int(math.ceil((m * A) ** 2 / math.log(2))) + PRECISION_HEADROOM


def _bisect_inverse(f: Callable[[float], float], target: float, lo: float,
                    hi: float, tol: float = BISECTION_TOL) -> float:
    flo = f(lo) - target
    if flo > 0:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) - target <= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def minimal_odd_index(m: float, A: float, eps: float, n_max: int = 200_000) -> int:
    """Smallest odd n with m A <= eps^(1/n) sqrt(n) / 2.

    The condition keeps the series truncation error below eps^2 on the
    whole argument range [-mA, mA].
    """
    target = m * A
    ln_eps = math.log(eps)
    n = 1
    while n <= n_max:
        if target <= math.exp(ln_eps / n) * math.sqrt(n) / 2.0:
            return n
        n += 2
    raise ValidationError(f"no admissible series index below {n_max}; "
                          "eps or L is out of the supported range")


def build_monotone_approx(spec: MonotoneSpec,
                          precision_bits: int | None = None) -> tuple[Poly, dict]:
    """Polynomial staircase approximant of an increasing surjection.

    Splits the range [0, 1] into t = ceil(1/eps) slabs, places a scaled
    sigmoid step at every interior breakpoint f^{-1}(i eps), and sums
    them with weight eps.  The result p satisfies the sandwich
    p - 2 eps <= f <= p + 3 eps on [0, A] and the derivative envelope
    -m eps^2 < p' < eps m_x + m eps^2 with m_x the local slope scale.

    Raises PrecisionError when precision_bits is below the cancellation
    requirement; passing None picks the requirement automatically.
    Returns the polynomial and a build report.
    """
    f, A, L, eps = spec.f, spec.A, spec.L, spec.eps
    t = int(math.ceil(1.0 / eps))
    eps_prime = 1.0 - (t - 1) * eps
    root_log = math.sqrt(math.log(eps ** -2))
    m = (2.0 * L / eps) * root_log

    breakpoints, m_list = [], []
    for i in range(1, t):
        p_i = _bisect_inverse(f, i * eps, 0.0, A)
        L_i = spec.local_lipschitz(p_i, eps / 2.0)
        if L_i > L * (1 + 1e-9):
            raise ValidationError(f"local_lipschitz({p_i}, {eps / 2}) = {L_i} "
                                  f"exceeds the global constant L = {L}")
        breakpoints.append(p_i)
        m_list.append((2.0 * L_i / eps) * root_log)

    n = minimal_odd_index(m, A, eps)
    required = required_precision_bits(m, A)
    if precision_bits is None:
        precision_bits = max(DEFAULT_PRECISION_BITS, required)
    _check_precision(precision_bits)
    if precision_bits < required:
        raise PrecisionError(
            f"precision_bits={precision_bits} is below the {required} bits required "
            f"to evaluate the series at argument m A = {m * A:.3g}")

    base = truncated_maclaurin(n, precision_bits)
    with _ctx(precision_bits):
        eps_m = mpfr(eps)
        acc = [mpfr(0)] * (2 * n + 2)
        terms = []
        for m_i, q_i in zip(m_list, breakpoints):
            piece = compose_affine(base, m_i, q_i)
            for j, c in enumerate(piece.coeffs):
                acc[j] += c
            terms.append((mpfr(m_i), mpfr(q_i)))
        coeffs = tuple(eps_m * c for c in acc)
    structure = StructuredForm(eps_m, n, tuple(terms), order=0)
    poly = Poly(coeffs, precision_bits, structure=structure)

    log_alpha_bound = 2.0 * ((A + 1.0) * m) ** 2
    report = {
        "name": spec.name,
        "eps": eps,
        "eps_prime": eps_prime,
        "t": t,
        "A": A,
        "L": L,
        "m": m,
        "m_list": list(m_list),
        "breakpoints": list(breakpoints),
        "n": n,
        "degree": poly.degree,
        "precision_bits": precision_bits,
        "required_bits": required,
        "log_alpha": poly.log_alpha,
        "log_alpha_bound": log_alpha_bound,
    }
    return poly, report


def trace_poly_functional(M: np.ndarray, poly: Poly) -> float:
    """sum_i poly(b_i^2) over the singular values b_i of a
    unit-Frobenius matrix M."""
    M = np.asarray(M, dtype=complex)
    if abs(np.linalg.norm(M) - 1.0) > 1e-10:
        raise ValidationError("trace_poly_functional is defined for unit Frobenius norm")
    s = np.linalg.svd(M, compute_uv=False)
    with _ctx(poly.precision_bits):
        total = sum((poly.evaluate(float(b) ** 2) for b in s), mpfr(0))
        return float(total)


def power_local_lipschitz(p: float) -> Callable[[float, float], float]:
    """Closed-form local Lipschitz scale of f(x) = x^p on [0, 1].

    The preimage of (x^p - e, x^p + e) ends at u = min((x^p + e)^(1/p), 1)
    and f' is increasing, so p u^(p-1) is a valid constant there.
    """
    def ll(x: float, e: float) -> float:
        u = min((max(x, 0.0) ** p + e) ** (1.0 / p), 1.0)
        return p * u ** (p - 1.0)
    return ll


def xp_spec(k: int, p: float,
            max_precision_bits: int = 1 << 15) -> MonotoneSpec:
    """Build spec for f(x) = x^p on [0, 1] at accuracy eps = k^-p.

    This is the resolution at which the staircase separates the top
    singular value of a k-dimensional output from the flat spectrum.
    Refuses pairings whose cancellation requirement exceeds
    ``max_precision_bits`` and names the largest feasible k.
    """
    if k < 2:
        raise ValidationError("need k >= 2")
    if not (1.0 < p <= 1.1):
        raise ValidationError("need p in (1, 1.1]")
    eps = float(k) ** -p
    m = (2.0 * p / eps) * math.sqrt(math.log(eps ** -2))

    def required_for(kk: int) -> int:
        e = float(kk) ** -p
        mm = (2.0 * p / e) * math.sqrt(math.log(e ** -2))
        return required_precision_bits(mm, 1.0)

    if required_for(k) > max_precision_bits:
        k_max = k
        while k_max > 2 and required_for(k_max) > max_precision_bits:
            k_max -= 1
        raise PrecisionError(
            f"k={k} at p={p} needs {required_for(k)} bits, beyond the "
            f"{max_precision_bits}-bit budget; largest feasible k is {k_max}")
    return MonotoneSpec(f=lambda x: x ** p, A=1.0, L=p, eps=eps,
                        local_lipschitz=power_local_lipschitz(p),
                        name=f"x^{p}@k={k}")


def derivative_regime_bounds(k: int, p: float, j: float = 1.0) -> list[dict]:
    """Piecewise bounds on the approximant's derivative for f = x^p.

    Three regimes of x in [0, 1], split at j k^(2/(3p) - 1) and
    5 j k^(1/p - 1); each entry carries (lo, hi, bound).
    """
    if k < 2 or not (1.0 < p <= 1.1):
        raise ValidationError("need k >= 2 and p in (1, 1.1]")
    root = math.sqrt(math.log(k ** (2.0 * p)))
    split1 = j * k ** (2.0 / (3.0 * p) - 1.0)
    split2 = 5.0 * j * k ** (1.0 / p - 1.0)
    return [
        {"lo": 0.0, "hi": split1,
         "bound": 4.0 * p * (j + 1.0) ** (p - 1.0) * root
                  * k ** (5.0 / 3.0 - 2.0 / (3.0 * p) - p)},
        {"lo": split1, "hi": split2,
         "bound": 4.0 * p * (5.0 * j) ** (p - 1.0) * root
                  * k ** (2.0 - p - 1.0 / p)},
        {"lo": split2, "hi": 1.0,
         "bound": 4.0 * p * root},
    ]
