"""Large-N edge laws: strong non-Hermiticity edge density and self-overlap,
and the weak non-Hermiticity edge laws of both ensembles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import DomainError
from .specfun import airy_tail_I0, airy_tail_I1, airy_tail_J, erfc, erfcx

SQRT2PI = math.sqrt(2.0 * math.pi)
DEFAULT_S_R = (-5.0, 1.0)


@dataclass(frozen=True)
class SnhParams:
    tau: float
    eta: Optional[float] = None
    theta: Optional[float] = None
    eta_tilde: Optional[float] = None

    def __post_init__(self):
        if not (0.0 <= self.tau < 1.0):
            raise DomainError(f"tau must lie in [0, 1), got {self.tau!r}")
        scale = math.sqrt(1.0 - self.tau ** 2)
        if self.eta is not None and self.eta_tilde is None:
            object.__setattr__(self, "eta_tilde", self.eta / scale)
        elif self.eta is None and self.eta_tilde is not None:
            object.__setattr__(self, "eta", self.eta_tilde * scale)
        elif self.eta is not None and not math.isclose(self.eta_tilde, self.eta / scale,
                                                       rel_tol=1e-12, abs_tol=1e-15):
            raise DomainError("eta_tilde is inconsistent with eta and tau")


@dataclass(frozen=True)
class WnhParams:
    kappa: float
    alpha: float
    x: float = 0.0
    y: float = 0.0

    def __post_init__(self):
        if not (self.kappa > 0 and self.alpha > 0):
            raise DomainError("kappa and alpha must be positive")
        if not math.isclose(self.kappa, (math.pi * self.alpha) ** 2 / 2.0, rel_tol=1e-12):
            raise DomainError("kappa must equal (pi alpha)^2 / 2")

    @classmethod
    def from_alpha(cls, alpha: float, x: float = 0.0, y: float = 0.0) -> "WnhParams":
        return cls((math.pi * alpha) ** 2 / 2.0, alpha, x, y)

    @classmethod
    def from_kappa(cls, kappa: float, x: float = 0.0, y: float = 0.0) -> "WnhParams":
        return cls(kappa, math.sqrt(2.0 * kappa) / math.pi, x, y)


def _out(v):
    v = np.asarray(v, dtype=float)
    return float(v) if v.ndim == 0 else v


# Strong non-Hermiticity.

def rho_snh_edge(eta, tau):
    """Edge density along the outward normal, the same for both ensembles."""
    eta = np.asarray(eta, dtype=float)
    s = 1.0 - tau * tau
    return _out(erfc(math.sqrt(2.0 / s) * eta) / (2.0 * math.pi * s))


def rho_snh_edge_normalized(eta, tau):
    """Edge density restricted to eta >= 0 and normalized to unit mass."""
    eta = np.asarray(eta, dtype=float)
    if np.any(eta < 0.0):
        raise DomainError("the normalized edge density is defined for eta >= 0 only")
    c = math.sqrt(2.0 / (1.0 - tau * tau))
    # integral of erfc(c eta) over eta > 0 is 1/(c sqrt(pi))
    return _out(c * math.sqrt(math.pi) * erfc(c * eta))


def _snh_core(eta_tilde):
    """exp(-2 t^2)/sqrt(2 pi) - t erfc(sqrt(2) t), the shared overlap profile."""
    t = np.asarray(eta_tilde, dtype=float)
    return np.exp(-2.0 * t * t) / SQRT2PI - t * erfc(math.sqrt(2.0) * t)


def overlap_snh_edge(eta, theta, tau):
    """Edge self-overlap density (leading order, divided by sqrt(N))."""
    s = 1.0 - tau * tau
    eta = np.asarray(eta, dtype=float)
    geom = np.sqrt((1.0 + tau * tau - 2.0 * tau * np.cos(2.0 * np.asarray(theta, dtype=float))) / s)
    return _out(geom * _snh_core(eta / math.sqrt(s)) / math.pi)


_ASYM_SWITCH = 6.0


def _one_minus_sqrtpi_u_erfcx(u):
    # asymptotic series of 1 - sqrt(pi) u erfcx(u), accurate for u > 8
    inv = 1.0 / (2.0 * u * u)
    term = inv
    total = inv
    for n in range(2, 14):
        term = -term * (2 * n - 1) * inv
        total = total + term
    return total


def weighted_conditional_snh(eta_tilde):
    """Universal weighted conditional self-overlap at the edge.

    Written as 1/(sqrt(2 pi) erfcx(u)) - t with u = sqrt(2) t, which never
    divides two underflowed quantities. Beyond t = 6 the remaining
    cancellation is removed with the asymptotic series of erfcx.
    """
    t = np.asarray(eta_tilde, dtype=float)
    u = math.sqrt(2.0) * t
    far = t > _ASYM_SWITCH
    safe_u = np.where(far, u, 0.0)
    ex = erfcx(np.where(far, 1.0, u))
    direct = 1.0 / (SQRT2PI * ex) - t
    # 1/(sqrt(2pi) erfcx(u)) - u/sqrt2 = (1 - sqrt(pi) u erfcx(u)) / (sqrt(2 pi) erfcx(u))
    ex_far = erfcx(np.where(far, safe_u, 1.0))
    asym = _one_minus_sqrtpi_u_erfcx(np.where(far, safe_u, 10.0)) / (SQRT2PI * ex_far)
    return _out(np.where(far, asym, direct))


def snh_weight(theta, tau, n):
    """Per-eigenvalue factor turning a sampled self-overlap into a sample of
    the universal weighted conditional mean: 1/(2 sqrt(N (1-tau^2) A(theta)))
    with A = 1 + tau^2 - 2 tau cos(2 theta)."""
    a = 1.0 + tau * tau - 2.0 * tau * np.cos(2.0 * np.asarray(theta, dtype=float))
    return _out(1.0 / (2.0 * np.sqrt(n * (1.0 - tau * tau) * a)))


# Weak non-Hermiticity.

def _check_kappa(kappa):
    if not (kappa > 0 and math.isfinite(kappa)):
        raise DomainError(f"kappa must be positive, got {kappa!r}")


def rho_wnh_edge_eginue(x, y, kappa):
    _check_kappa(kappa)
    return math.exp(-y * y / kappa) / math.sqrt(math.pi * kappa) * airy_tail_I0(x)


def rho_wnh_edge_eginoe(x, y, kappa):
    """Edge density of complex eigenvalues of the real ensemble. Negative y
    is mapped to |y| by reflection symmetry."""
    _check_kappa(kappa)
    y = abs(y)
    return y * float(erfc(y / math.sqrt(kappa))) * airy_tail_J(x)


class _Marginal:
    """Normalized one-dimensional density with a vectorized call."""

    def __init__(self, fn, norm, support):
        self._fn = fn
        self.norm = norm
        self.support = support

    def __call__(self, v):
        arr = np.asarray(v, dtype=float)
        vals = np.vectorize(self._fn, otypes=[float])(arr) / self.norm
        lo, hi = self.support
        vals = np.where((arr >= lo) & (arr <= hi), vals, 0.0)
        return _out(vals)

    def bin_masses(self, edges):
        """Probability mass in each bin, by Gauss-Legendre per bin."""
        edges = np.asarray(edges, dtype=float)
        nodes, weights = np.polynomial.legendre.leggauss(12)
        out = np.empty(len(edges) - 1)
        for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
            a2, b2 = max(a, self.support[0]), min(b, self.support[1])
            if b2 <= a2:
                out[i] = 0.0
                continue
            mid, half = 0.5 * (a2 + b2), 0.5 * (b2 - a2)
            out[i] = half * float(np.dot(weights, self(mid + half * nodes)))
        return out


def wnh_marginals(kind: str, kappa: float, s_r=DEFAULT_S_R):
    """Normalized x-marginal on S_R and y-marginal on the real line.

    ``kind`` is "complex" or "real". The x-marginal integrates the x-profile of
    the edge density over S_R; the y-marginal is the normalized y-factor.
    """
    _check_kappa(kappa)
    lo, hi = float(s_r[0]), float(s_r[1])
    if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
        raise DomainError(f"S_R must be a non-degenerate finite interval, got {s_r!r}")
    if kind == "complex":
        xfun = airy_tail_I0
        yfun = lambda y: math.exp(-y * y / kappa)
        ynorm = math.sqrt(math.pi * kappa)
    elif kind == "real":
        xfun = airy_tail_J
        yfun = lambda y: abs(y) * float(erfc(abs(y) / math.sqrt(kappa)))
        # integral over the real line of |y| erfc(|y|/sqrt(kappa)) is kappa/2
        ynorm = kappa / 2.0
    else:
        raise DomainError(f"kind must be 'real' or 'complex', got {kind!r}")
    xnorm = integrate.quad(xfun, lo, hi, epsabs=0.0, epsrel=1e-11, limit=200)[0]
    return _Marginal(xfun, xnorm, (lo, hi)), _Marginal(yfun, ynorm, (-math.inf, math.inf))


def shifted_conditional_wnh_eginue(x, kappa):
    """Edge limit of N^(2/3) (E_N - 1) for the complex ensemble."""
    _check_kappa(kappa)
    i0 = airy_tail_I0(x)
    if i0 < 1e-290:
        raise DomainError(f"Airy tail integral underflows at x = {x!r}; use x below about 60")
    return 2.0 * kappa * airy_tail_I1(x) / i0


def conditional_wnh_eginoe(y, kappa):
    """Edge conditional self-overlap of the real ensemble as a function of y.

    Uses erfcx so the ratio stays finite for large y/sqrt(kappa).
    """
    _check_kappa(kappa)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0):
        raise DomainError("the conditional self-overlap diverges as y -> 0; need y > 0")
    u = y / math.sqrt(kappa)
    return _out((math.sqrt(kappa / math.pi) / erfcx(u) + kappa / (2.0 * y)) / y)
