"""Samplers for the elliptic Ginibre ensembles (complex and real) in the
fixed-tau and weak non-Hermiticity regimes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ConfigError

KINDS = ("real", "complex")
_SEED_MAX = 2 ** 64


@dataclass(frozen=True)
class FixedTau:
    tau: float

    def __post_init__(self):
        if not (0.0 <= self.tau < 1.0):
            raise ConfigError(f"tau must lie in [0, 1), got {self.tau!r}")


@dataclass(frozen=True)
class WeakNonHermiticity:
    """tau = 1 - kappa/N with kappa = (pi alpha)^2 / 2."""

    alpha: float

    def __post_init__(self):
        if not (self.alpha > 0.0 and math.isfinite(self.alpha)):
            raise ConfigError(f"alpha must be positive, got {self.alpha!r}")

    @property
    def kappa(self) -> float:
        return (math.pi * self.alpha) ** 2 / 2.0


Regime = Union[FixedTau, WeakNonHermiticity]


@dataclass(frozen=True)
class EnsembleSpec:
    kind: str
    n: int
    regime: Regime

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise ConfigError(f"n must be a positive integer, got {self.n!r}")
        if not isinstance(self.regime, (FixedTau, WeakNonHermiticity)):
            raise ConfigError(f"unknown regime {self.regime!r}")
        if isinstance(self.regime, WeakNonHermiticity) and self.regime.kappa >= self.n:
            raise ConfigError(
                f"(pi alpha)^2/2 = {self.regime.kappa:.6g} must be below n = {self.n}")

    @classmethod
    def fixed(cls, kind: str, n: int, tau: float) -> "EnsembleSpec":
        return cls(kind, int(n), FixedTau(float(tau)))

    @classmethod
    def wnh(cls, kind: str, n: int, alpha: float) -> "EnsembleSpec":
        return cls(kind, int(n), WeakNonHermiticity(float(alpha)))

    @property
    def tau(self) -> float:
        return effective_tau(self)

    @property
    def kappa(self):
        """kappa for the weak regime, None for fixed tau."""
        if isinstance(self.regime, WeakNonHermiticity):
            return self.regime.kappa
        return None


def effective_tau(spec: EnsembleSpec) -> float:
    if isinstance(spec.regime, FixedTau):
        return spec.regime.tau
    kappa = spec.regime.kappa
    if kappa >= spec.n:
        raise ConfigError(f"(pi alpha)^2/2 = {kappa:.6g} must be below n = {spec.n}")
    return 1.0 - kappa / spec.n


@dataclass(frozen=True)
class SeededStream:
    """One independent random stream, keyed by (master_seed, stream_index).

    Streams come from a Philox generator seeded through a SeedSequence whose
    spawn key is the stream index, so distinct indices never share state.
    """

    master_seed: int
    stream_index: int

    def __post_init__(self):
        if not (0 <= int(self.master_seed) < _SEED_MAX):
            raise ConfigError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed!r}")
        if int(self.stream_index) < 0:
            raise ConfigError(f"stream_index must be non-negative, got {self.stream_index!r}")

    def generator(self, substream: int = 0) -> np.random.Generator:
        """Matrix entries come from substream 0; auxiliary draws tied to the
        same sample (for example Krylov start vectors) use higher substreams."""
        key = (int(self.stream_index),) if substream == 0 else (int(self.stream_index), int(substream))
        seq = np.random.SeedSequence(int(self.master_seed), spawn_key=key)
        return np.random.Generator(np.random.Philox(seq))


def _mix(tau: float):
    # X = c1 G + c2 G^T (or G^H): the symmetric and antisymmetric (Hermitian
    # and anti-Hermitian) parts of one Ginibre G are independent, which reproduces
    # sqrt((1+tau)/2) S + sqrt((1-tau)/2) A from a single fill.
    sp, sm = math.sqrt(1.0 + tau), math.sqrt(1.0 - tau)
    return 0.5 * (sp + sm), 0.5 * (sp - sm)


def sample_eginue(spec: EnsembleSpec, stream: SeededStream) -> np.ndarray:
    """Complex matrix with E|X_ij|^2 = 1 and E X_ij X_ji = tau."""
    if spec.kind != "complex":
        raise ConfigError("sample_eginue needs a complex ensemble spec")
    n = spec.n
    rng = stream.generator()
    g = rng.standard_normal((2, n, n))
    g = (g[0] + 1j * g[1]) * math.sqrt(0.5)
    c1, c2 = _mix(effective_tau(spec))
    return c1 * g + c2 * g.conj().T


def sample_eginoe(spec: EnsembleSpec, stream: SeededStream) -> np.ndarray:
    """Real matrix with Var X_ij = 1, Cov(X_ij, X_ji) = tau, Var X_ii = 1 + tau."""
    if spec.kind != "real":
        raise ConfigError("sample_eginoe needs a real ensemble spec")
    n = spec.n
    rng = stream.generator()
    g = rng.standard_normal((n, n))
    c1, c2 = _mix(effective_tau(spec))
    return c1 * g + c2 * g.T


def sample(spec: EnsembleSpec, stream: SeededStream) -> np.ndarray:
    if spec.kind == "complex":
        return sample_eginue(spec, stream)
    return sample_eginoe(spec, stream)


def sample_batch(spec: EnsembleSpec, master_seed: int, stream_indices) -> np.ndarray:
    """Stack of matrices, one per stream index, shape (count, n, n)."""
    mats = [sample(spec, SeededStream(master_seed, int(i))) for i in stream_indices]
    dtype = complex if spec.kind == "complex" else float
    if not mats:
        return np.empty((0, spec.n, spec.n), dtype=dtype)
    return np.stack(mats)
