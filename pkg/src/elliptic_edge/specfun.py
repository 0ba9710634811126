"""Special functions: Hermite polynomials and their weighted pair sums,
erfc, Airy functions and the Airy tail integrals used by the edge laws."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import RangeError

AIRY_RANGE = (-20.0, 200.0)
AIRY_TAIL_MIN_X = -15.0

# Rescale threshold for the normalized Hermite recurrence. Squared terms stay
# below 1e200, so k-weighted sums over 1e4 terms cannot overflow.
_BIG = 1e100


@dataclass(frozen=True)
class ScaledValue:
    """A real number stored as ``mantissa * exp(log_scale)``.

    After normalization ``abs(mantissa)`` lies in ``[1, e)`` or the mantissa
    is exactly zero.
    """

    mantissa: float
    log_scale: float = 0.0

    @classmethod
    def from_float(cls, x: float) -> "ScaledValue":
        x = float(x)
        if x == 0.0:
            return cls(0.0, 0.0)
        if not math.isfinite(x):
            raise ValueError(f"cannot encode non-finite value {x!r}")
        k = math.floor(math.log(abs(x)))
        scale = math.exp(k)
        m = x / scale
        # pick the neighbouring mantissa that decodes closest to x
        best = m
        for cand in (math.nextafter(m, -math.inf), math.nextafter(m, math.inf)):
            if abs(cand * scale - x) < abs(best * scale - x):
                best = cand
        return cls._clamped(best, float(k))

    @classmethod
    def from_log(cls, log_abs: float, sign: float = 1.0) -> "ScaledValue":
        """Build the value ``sign * exp(log_abs)`` without forming it."""
        if sign == 0 or log_abs == -math.inf:
            return cls(0.0, 0.0)
        k = math.floor(log_abs)
        return cls._clamped(math.copysign(math.exp(log_abs - k), sign), float(k))

    @classmethod
    def _clamped(cls, m: float, k: float) -> "ScaledValue":
        # guard against mantissas that rounded onto the interval ends
        if abs(m) >= math.e:
            m /= math.e
            k += 1.0
        elif abs(m) < 1.0:
            m *= math.e
            k -= 1.0
        return cls(m, k)

    def normalized(self) -> "ScaledValue":
        if self.mantissa == 0.0:
            return ScaledValue(0.0, 0.0)
        m, k = self.mantissa, float(self.log_scale)
        frac = k - math.floor(k)
        if frac:
            m, k = m * math.exp(frac), math.floor(k)
        # shift by a whole power of e so only one rounding enters the mantissa
        j = math.floor(math.log(abs(m)))
        if j:
            m = m * math.exp(-j)
            k += j
        return ScaledValue._clamped(m, k)

    def log_abs(self) -> float:
        if self.mantissa == 0.0:
            return -math.inf
        return math.log(abs(self.mantissa)) + self.log_scale

    def sign(self) -> float:
        return 0.0 if self.mantissa == 0.0 else math.copysign(1.0, self.mantissa)

    def to_float(self) -> float:
        if self.mantissa == 0.0:
            return 0.0
        try:
            if float(self.log_scale).is_integer():
                return self.mantissa * math.exp(self.log_scale)
            return self.sign() * math.exp(self.log_abs())
        except OverflowError:
            # not representable as a double, as in IEEE arithmetic
            return math.copysign(math.inf, self.mantissa)

    __float__ = to_float

    def __mul__(self, other):
        if not isinstance(other, ScaledValue):
            other = ScaledValue.from_float(other)
        return ScaledValue(self.mantissa * other.mantissa,
                           self.log_scale + other.log_scale).normalized()

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, ScaledValue):
            other = ScaledValue.from_float(other)
        if other.mantissa == 0.0:
            raise ZeroDivisionError("division by a zero ScaledValue")
        return ScaledValue(self.mantissa / other.mantissa,
                           self.log_scale - other.log_scale).normalized()

    def __add__(self, other):
        if not isinstance(other, ScaledValue):
            other = ScaledValue.from_float(other)
        if self.mantissa == 0.0:
            return other.normalized()
        if other.mantissa == 0.0:
            return self.normalized()
        hi, lo = (self, other) if self.log_scale >= other.log_scale else (other, self)
        m = hi.mantissa + lo.mantissa * math.exp(lo.log_scale - hi.log_scale)
        return ScaledValue(m, hi.log_scale).normalized()

    __radd__ = __add__

    def __neg__(self):
        return ScaledValue(-self.mantissa, self.log_scale)

    def __sub__(self, other):
        if not isinstance(other, ScaledValue):
            other = ScaledValue.from_float(other)
        return self + (-other)


def hermite_he(k: int, x: complex) -> complex:
    """Monic (probabilists') Hermite polynomial He_k(x) by the three-term
    recurrence He_{k+1} = x He_k - k He_{k-1}."""
    if k < 0:
        raise ValueError("k must be non-negative")
    prev, cur = 0.0, 1.0
    for j in range(k):
        prev, cur = cur, x * cur - j * prev
    return cur


@dataclass
class HermiteSweep:
    """Terms of the Hermite pair sums for a batch of points.

    ``a[k]`` holds ``tau^k/k! |He_k(z/sqrt(tau))|^2`` and ``r[k]`` the k-th
    summand of the antisymmetrized pair sum, both divided by
    ``exp(2 * scale[k])``. Rows run over k, columns over points.
    """

    a: np.ndarray
    r: np.ndarray
    scale: np.ndarray

    @property
    def n_terms(self) -> int:
        return self.a.shape[0]

    def weighted_sum(self, which: str, stop: int, weights=None):
        """Return ``(value, log_scale)`` arrays for the sum over ``k < stop``.

        The true sum is ``value * exp(log_scale)``.
        """
        terms = self.a if which == "a" else self.r
        if stop <= 0:
            zeros = np.zeros(terms.shape[1])
            return zeros, zeros.copy()
        ref = self.scale[stop - 1]
        rel = np.exp(2.0 * (self.scale[:stop] - ref))
        block = terms[:stop] * rel
        if weights is not None:
            block = block * np.asarray(weights, float)[:stop, None]
        return block.sum(axis=0), 2.0 * ref


def hermite_sweep(z, n_terms: int, tau: float) -> HermiteSweep:
    """Evaluate ``n_terms`` terms of the Hermite pair sums at every point of ``z``.

    Uses the normalized functions psi_k = sqrt(tau^k/k!) He_k(z/sqrt(tau)),
    which obey psi_{k+1} = (z psi_k - tau sqrt(k) psi_{k-1}) / sqrt(k+1) and
    stay finite at tau = 0, where they reduce to z^k/sqrt(k!). The pair-sum
    summands satisfy r_k = |psi_k|^2 + tau r_{k-1}, a sum of positive terms
    that needs no division by Im z.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    m = z.size
    a = np.empty((max(n_terms, 0), m))
    r = np.empty_like(a)
    scale = np.zeros_like(a)
    if n_terms <= 0:
        return HermiteSweep(a, r, scale)
    s = np.zeros(m)
    prev = np.zeros(m, dtype=complex)
    cur = np.ones(m, dtype=complex)
    racc = np.zeros(m)
    for k in range(n_terms):
        ak = cur.real ** 2 + cur.imag ** 2
        racc = ak + tau * racc
        a[k] = ak
        r[k] = racc
        scale[k] = s
        if k == n_terms - 1:
            break
        nxt = (z * cur - (tau * math.sqrt(k)) * prev) / math.sqrt(k + 1)
        prev, cur = cur, nxt
        mag = np.abs(cur)
        big = mag > _BIG
        if big.any():
            f = mag[big]
            prev[big] /= f
            cur[big] /= f
            racc[big] /= f * f
            s[big] += np.log(f)
    return HermiteSweep(a, r, scale)


_PAIR_MODES = ("plain", "k_weighted", "shifted_pair")


def hermite_weighted_pair_sum(N: int, z: complex, tau: float, mode: str = "plain") -> ScaledValue:
    """Scaled evaluation of the N-term Hermite pair sums.

    ``plain``: sum_{k<N} tau^k/k! He_k(z/sqrt(tau)) He_k(conj(z)/sqrt(tau)).
    ``k_weighted``: the same with an extra factor k.
    ``shifted_pair``: sum_{k<N} tau^(k+1/2)/k! [He_{k+1}(w*) He_k(w) -
    He_{k+1}(w) He_k(w*)] / (conj(z) - z), with w = z/sqrt(tau) and w* its
    conjugate. All three are real and non-negative.
    """
    if not (0.0 < tau < 1.0):
        raise ValueError(f"tau must lie in (0, 1), got {tau!r}")
    if N < 0:
        raise ValueError("N must be non-negative")
    if mode not in _PAIR_MODES:
        raise ValueError(f"mode must be one of {_PAIR_MODES}")
    if N == 0:
        return ScaledValue(0.0, 0.0)
    sweep = hermite_sweep([z], N, tau)
    weights = np.arange(N, dtype=float) if mode == "k_weighted" else None
    which = "r" if mode == "shifted_pair" else "a"
    val, logs = sweep.weighted_sum(which, N, weights)
    if val[0] == 0.0:
        return ScaledValue(0.0, 0.0)
    return ScaledValue.from_log(math.log(val[0]) + logs[0])


def erfc(x):
    """Complementary error function 1 - erf(x)."""
    return special.erfc(x)


def erfcx(x):
    """Scaled complementary error function exp(x^2) erfc(x)."""
    return special.erfcx(x)


def log_erfc(x):
    """log erfc(x), finite far into the right tail."""
    x = np.asarray(x, dtype=float)
    out = np.where(x > 0, -x * x + np.log(special.erfcx(np.maximum(x, 0.0))),
                   np.log(special.erfc(np.minimum(x, 0.0))))
    return out[()] if out.ndim == 0 else out


def _check_airy_range(x):
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < AIRY_RANGE[0]) or np.any(arr > AIRY_RANGE[1]):
        raise RangeError(f"Airy argument outside the accurate range {AIRY_RANGE}: {x!r}")
    return arr


def airy_ai(x):
    """Airy function Ai(x) on [-20, 200]."""
    ai, _, _, _ = special.airy(_check_airy_range(x))
    return ai[()] if np.ndim(ai) == 0 else ai


def airy_ai_prime(x):
    """Derivative Ai'(x) on [-20, 200]."""
    _, aip, _, _ = special.airy(_check_airy_range(x))
    return aip[()] if np.ndim(aip) == 0 else aip


def airy_ai_second(x):
    """Second derivative Ai''(x) = x Ai(x), from the Airy equation."""
    arr = _check_airy_range(x)
    ai, _, _, _ = special.airy(arr)
    out = arr * ai
    return out[()] if np.ndim(out) == 0 else out


def _tail_integral(x: float, integrand) -> float:
    """Integrate ``integrand(u)`` over u in [x, inf) for an integrand that
    decays like Ai(u)^2.

    The oscillatory part below u = 0 is one adaptive quadrature. Above it,
    panels of width 2 are added until the integrand at the panel end falls
    below 1e-24 of the running total; monotone superexponential decay bounds
    the discarded remainder by the same relative amount.
    """
    x = float(x)
    if not math.isfinite(x) or x < AIRY_TAIL_MIN_X:
        raise RangeError(f"tail integral needs x >= {AIRY_TAIL_MIN_X}, got {x!r}")
    if x > AIRY_RANGE[1]:
        raise RangeError(f"tail integral argument above {AIRY_RANGE[1]}: {x!r}")
    opts = dict(epsabs=0.0, epsrel=1e-12, limit=400)
    total = 0.0
    start = x
    if x < 0.0:
        total += integrate.quad(integrand, x, 0.0, **opts)[0]
        start = 0.0
    if _ai2(start) == 0.0:
        return max(total, 0.0)
    width = 2.0
    while True:
        stop = min(start + width, AIRY_RANGE[1])
        total += integrate.quad(integrand, start, stop, **opts)[0]
        if stop >= AIRY_RANGE[1] or abs(integrand(stop)) < 1e-24 * abs(total):
            break
        start = stop
    return total


def _ai2(u):
    ai = special.airy(u)[0]
    return ai * ai


def airy_tail_I0(x: float) -> float:
    """Integral of Ai(x+t)^2 over t in [0, inf)."""
    return max(_tail_integral(x, _ai2), 0.0)


def airy_tail_I1(x: float) -> float:
    """Integral of t Ai(x+t)^2 over t in [0, inf)."""
    x = float(x)
    return max(_tail_integral(x, lambda u: (u - x) * _ai2(u)), 0.0)


def _airy_bracket(u):
    ai, aip, _, _ = special.airy(u)
    return aip * aip - ai * (u * ai)


def airy_tail_J(x: float) -> float:
    """Integral of Ai'(x+t)^2 - Ai(x+t) Ai''(x+t) over t in [0, inf)."""
    return max(_tail_integral(x, _airy_bracket), 0.0)
