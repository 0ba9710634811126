"""Exact finite-N mean density of complex eigenvalues and mean self-overlap
for both elliptic Ginibre ensembles.

Densities are normalized to integrate to N over the plane. Every function
accepts a scalar or an array of points and evaluates the Hermite sums once
per call through a shared sweep, in log-scaled arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DomainError
from .specfun import HermiteSweep, ScaledValue, erfcx, hermite_sweep, log_erfc

IM_FLOOR = 1e-12
DENSITY_FLOOR = 1e-300


@dataclass(frozen=True)
class FiniteNContext:
    n: int
    tau: float
    kind: str = "complex"

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise DomainError(f"n must be a positive integer, got {self.n!r}")
        if not (0.0 <= self.tau < 1.0):
            raise DomainError(f"tau must lie in [0, 1), got {self.tau!r}")
        if self.kind not in ("real", "complex"):
            raise DomainError(f"kind must be 'real' or 'complex', got {self.kind!r}")


def _ginibre_sweep(z, n_terms: int) -> HermiteSweep:
    """Terms |z|^(2k)/k! of the tau = 0 kernel, evaluated from logarithms."""
    z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    k = np.arange(n_terms, dtype=float)[:, None]
    with np.errstate(divide="ignore"):
        log_r2 = np.log(np.abs(z) ** 2)[None, :]
    with np.errstate(invalid="ignore"):
        log_a = np.where(k == 0, 0.0, k * log_r2) - gammaln(k + 1.0)
    scale = 0.5 * np.maximum.accumulate(log_a, axis=0)
    a = np.exp(log_a - 2.0 * scale)
    return HermiteSweep(a, a.copy(), scale)


def _sweep(ctx: FiniteNContext, z, n_terms: int) -> HermiteSweep:
    if ctx.tau == 0.0:
        return _ginibre_sweep(z, n_terms)
    return hermite_sweep(z, n_terms, ctx.tau)


def _log_sum(sweep, which, stop, weights=None):
    val, logs = sweep.weighted_sum(which, stop, weights)
    with np.errstate(divide="ignore"):
        return np.where(val > 0.0, np.log(np.where(val > 0.0, val, 1.0)) + logs, -np.inf)


def _as_points(z):
    arr = np.asarray(z, dtype=complex)
    return arr, np.atleast_1d(arr).ravel()


def _shape(out, like):
    out = out.reshape(np.shape(like))
    return float(out) if out.ndim == 0 else out


def _guard_imag(flat):
    if np.any(np.abs(flat.imag) < IM_FLOOR):
        raise DomainError(f"|Im z| below {IM_FLOOR:g}: the complex-eigenvalue formula is not defined on the real line")


def _log_prefactor_ue(ctx, flat):
    t = ctx.tau
    return (-(np.abs(flat) ** 2 - t * (flat ** 2).real) / (1.0 - t * t)
            - math.log(math.pi * math.sqrt(1.0 - t * t)))


def _log_prefactor_oe_rho(ctx, flat):
    t = ctx.tau
    x, y = flat.real, np.abs(flat.imag)
    c = math.sqrt(2.0 / (1.0 - t * t))
    return (0.5 * math.log(2.0 / math.pi) + np.log(y) - math.log(1.0 + t)
            + (y * y - x * x) / (1.0 + t) + log_erfc(c * y))


def _log_prefactor_oe_overlap(ctx, flat):
    t = ctx.tau
    x, y = flat.real, np.abs(flat.imag)
    c = math.sqrt(2.0 / (1.0 - t * t))
    bracket = 1.0 + math.sqrt(math.pi * (1.0 - t * t) / 2.0) * erfcx(c * y) / (2.0 * y)
    return (-math.log(math.pi) + 0.5 * math.log((1.0 - t) / (1.0 + t))
            - x * x / (1.0 + t) - y * y / (1.0 - t) + np.log(bracket))


# Log-domain building blocks. Indices follow the closed forms: a sum "to n"
# includes the k = n term, so it covers the first n + 1 sweep entries.

def _log_rho_ue(ctx, flat, sweep, n):
    return _log_prefactor_ue(ctx, flat) + _log_sum(sweep, "a", n)


def _log_overlap_ue(ctx, flat, sweep):
    n, t = ctx.n, ctx.tau
    # (N-2) rho_{N-2} - R_{N-3} = prefactor * sum_{k<=N-3} (N-2-k) a_k
    w = np.maximum(n - 2.0 - np.arange(sweep.n_terms), 0.0)
    parts = np.stack([_log_sum(sweep, "a", n),
                      math.log(1.0 - t * t) + _log_sum(sweep, "a", n - 1),
                      math.log(1.0 - t * t) + _log_sum(sweep, "a", n - 2, w)])
    return _log_prefactor_ue(ctx, flat) + _logsumexp(parts)


def _log_overlap_oe(ctx, flat, sweep):
    n, t = ctx.n, ctx.tau
    # (N-3) P_{N-4} - T_{N-4} = sum_{k<=N-4} (N-3-k) r_k
    w = np.maximum(n - 3.0 - np.arange(sweep.n_terms), 0.0)
    parts = np.stack([_log_sum(sweep, "r", n - 1),
                      math.log(1.0 - t * t) + _log_sum(sweep, "r", n - 2),
                      math.log(1.0 - t * t) + _log_sum(sweep, "r", n - 3, w)])
    return _log_prefactor_oe_overlap(ctx, flat) + _logsumexp(parts)


def _log_rho_oe(ctx, flat, sweep):
    return _log_prefactor_oe_rho(ctx, flat) + _log_sum(sweep, "r", ctx.n - 1)


def _logsumexp(parts):
    top = np.max(parts, axis=0)
    safe = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        return np.where(np.isfinite(top),
                        safe + np.log(np.sum(np.exp(parts - safe), axis=0)), -np.inf)


def _require(ctx, kind, min_n=1):
    if ctx.kind != kind:
        raise DomainError(f"context kind is {ctx.kind!r}, this formula needs {kind!r}")
    if ctx.n < min_n:
        raise DomainError(f"this formula needs n >= {min_n}, got {ctx.n}")


def rho_finite_eginue(ctx: FiniteNContext, z):
    """Mean density of eigenvalues of the complex ensemble."""
    _require(ctx, "complex")
    arr, flat = _as_points(z)
    sweep = _sweep(ctx, flat, ctx.n)
    return _shape(np.exp(_log_rho_ue(ctx, flat, sweep, ctx.n)), arr)


def rho_n_eginue_shifted(ctx: FiniteNContext, m: int, z):
    """The complex-ensemble density expression with its sum cut at m terms."""
    arr, flat = _as_points(z)
    sweep = _sweep(ctx, flat, max(m, 1))
    return _shape(np.exp(_log_rho_ue(ctx, flat, sweep, m)), arr)


def r_n(ctx: FiniteNContext, n_terms: int, z):
    """R_n: prefactor times sum_{k<=n} k tau^k/k! |He_k(z/sqrt(tau))|^2."""
    arr, flat = _as_points(z)
    stop = n_terms + 1
    sweep = _sweep(ctx, flat, stop)
    w = np.arange(stop, dtype=float)
    return _shape(np.exp(_log_prefactor_ue(ctx, flat) + _log_sum(sweep, "a", stop, w)), arr)


def p_n_scaled(ctx: FiniteNContext, n_terms: int, z) -> ScaledValue:
    """P_n at a single point as a ScaledValue (no overflow for large n)."""
    flat = np.array([complex(z)])
    _guard_imag(flat)
    lv = _log_sum(_sweep(ctx, flat, n_terms + 1), "r", n_terms + 1)[0]
    return ScaledValue.from_log(lv) if np.isfinite(lv) else ScaledValue(0.0)


def p_n(ctx: FiniteNContext, n_terms: int, z):
    """P_n: the antisymmetrized Hermite pair sum over k = 0..n divided by
    (conj(z) - z). Plain floats overflow beyond n of a few hundred; use
    p_n_scaled there."""
    arr, flat = _as_points(z)
    _guard_imag(flat)
    if n_terms < 0:
        return _shape(np.zeros(flat.size), arr)
    lv = _log_sum(_sweep(ctx, flat, n_terms + 1), "r", n_terms + 1)
    return _shape(np.exp(lv), arr)


def t_n(ctx: FiniteNContext, n_terms: int, z):
    """T_n: the k-weighted version of P_n."""
    arr, flat = _as_points(z)
    _guard_imag(flat)
    if n_terms < 0:
        return _shape(np.zeros(flat.size), arr)
    stop = n_terms + 1
    w = np.arange(stop, dtype=float)
    lv = _log_sum(_sweep(ctx, flat, stop), "r", stop, w)
    return _shape(np.exp(lv), arr)


def rho_finite_eginoe(ctx: FiniteNContext, z):
    """Mean density of complex eigenvalues of the real ensemble."""
    _require(ctx, "real", 2)
    arr, flat = _as_points(z)
    _guard_imag(flat)
    sweep = _sweep(ctx, flat, ctx.n - 1)
    return _shape(np.exp(_log_rho_oe(ctx, flat, sweep)), arr)


def overlap_finite_eginue(ctx: FiniteNContext, z):
    """Mean self-overlap density of the complex ensemble."""
    _require(ctx, "complex", 3)
    arr, flat = _as_points(z)
    sweep = _sweep(ctx, flat, ctx.n)
    return _shape(np.exp(_log_overlap_ue(ctx, flat, sweep)), arr)


def overlap_finite_eginoe(ctx: FiniteNContext, z):
    """Mean self-overlap density at complex points of the real ensemble."""
    _require(ctx, "real", 4)
    arr, flat = _as_points(z)
    _guard_imag(flat)
    sweep = _sweep(ctx, flat, ctx.n - 1)
    return _shape(np.exp(_log_overlap_oe(ctx, flat, sweep)), arr)


def finite_n_profile(ctx: FiniteNContext, z):
    """(log density, log overlap) at every point from a single sweep."""
    arr, flat = _as_points(z)
    if ctx.kind == "complex":
        _require(ctx, "complex", 3)
        sweep = _sweep(ctx, flat, ctx.n)
        lr = _log_rho_ue(ctx, flat, sweep, ctx.n)
        lo = _log_overlap_ue(ctx, flat, sweep)
    else:
        _require(ctx, "real", 4)
        _guard_imag(flat)
        sweep = _sweep(ctx, flat, ctx.n - 1)
        lr = _log_rho_oe(ctx, flat, sweep)
        lo = _log_overlap_oe(ctx, flat, sweep)
    shape = np.shape(arr)
    return lr.reshape(shape), lo.reshape(shape)


def conditional_overlap(ctx: FiniteNContext, z):
    """Mean conditional self-overlap O_N(z) / rho_N(z)."""
    arr, _ = _as_points(z)
    lr, lo = finite_n_profile(ctx, z)
    lr = np.atleast_1d(lr)
    if np.any(lr < math.log(DENSITY_FLOOR)):
        raise DomainError("density underflows at the requested point; the conditional mean is undefined there")
    return _shape(np.exp(np.atleast_1d(lo) - lr), arr)
