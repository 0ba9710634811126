"""Experiment configuration, binning specs and scale presets."""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np

from ..ensembles import EnsembleSpec
from ..errors import ConfigError

EXPERIMENTS = ("snh_density", "snh_overlap", "wnh_density", "wnh_overlap")
SNH_EXPERIMENTS = ("snh_density", "snh_overlap")
WNH_EXPERIMENTS = ("wnh_density", "wnh_overlap")
EXCLUSIONS = ("imag", "theta")

WORKERS_ENV = "ELLIPTIC_EDGE_WORKERS"
DEFAULT_CHUNK = 8

# Desk-scale defaults: N and eigenvalue budget per experiment.
DESK_SCALE = {
    "snh_density": (400, 100_000),
    "snh_overlap": (400, 100_000),
    "wnh_density": (1000, 100_000),
    "wnh_overlap": (1000, 100_000),
}
PAPER_SCALE = {
    "snh_density": (1000, 10_000_000),
    "snh_overlap": (2500, 1_000_000),
    "wnh_density": (1000, 10_000_000),
    "wnh_overlap": (1000, 10_000_000),
}

# Default binning per experiment, as "name=lo:hi:count" items. Histogram
# items give edges; window items give evenly spaced centers.
DEFAULT_BINS = {
    "snh_density": "eta=0:2:40",
    "snh_overlap": "eta_tilde=-2:2:17",
    "wnh_density": "x=-5:1:24,y=0:3:120",
    "wnh_overlap": "x=-3:0.5:8,y=0.2:2:10",
}


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    count: int

    def edges(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count + 1)

    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)

    def text(self) -> str:
        return f"{self.lo!r}:{self.hi!r}:{self.count}"


def parse_bins(spec: str) -> Dict[str, Axis]:
    """Parse "name=lo:hi:count[,name=lo:hi:count...]"."""
    out = {}
    if not spec or not spec.strip():
        raise ConfigError("empty bins spec")
    for item in spec.split(","):
        item = item.strip()
        if "=" not in item:
            raise ConfigError(f"bins item {item!r} must look like name=lo:hi:count")
        name, rng = item.split("=", 1)
        parts = rng.split(":")
        if len(parts) != 3:
            raise ConfigError(f"bins item {item!r} must look like name=lo:hi:count")
        try:
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ConfigError(f"bad number in bins item {item!r}") from exc
        if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo and count >= 1):
            raise ConfigError(f"bins item {item!r} needs hi > lo and count >= 1")
        out[name.strip()] = Axis(lo, hi, count)
    return out


def env_workers(default: int = 1) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None or raw == "":
        return default
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ConfigError(f"{WORKERS_ENV} must be at least 1")
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    ensemble: str
    n: int
    tau: Optional[float] = None
    alpha: Optional[float] = None
    target_eigenvalue_count: int = 100_000
    master_seed: int = 0
    worker_count: int = 1
    bins: str = ""
    output_dir: Optional[str] = None
    exclusion: str = "imag"
    exclusion_threshold: float = 1.0
    s_r: Tuple[float, float] = (-5.0, 1.0)
    max_matrices: Optional[int] = None
    chunk_size: int = DEFAULT_CHUNK
    real_tol_factor: float = 1e-9
    min_retained: int = 1000

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.ensemble not in ("real", "complex"):
            raise ConfigError(f"ensemble must be 'real' or 'complex', got {self.ensemble!r}")
        if not self.bins:
            object.__setattr__(self, "bins", DEFAULT_BINS[self.experiment])
        object.__setattr__(self, "s_r", tuple(float(v) for v in self.s_r))
        if self.experiment in SNH_EXPERIMENTS:
            if self.tau is None or self.alpha is not None:
                raise ConfigError(f"{self.experiment} needs --tau (fixed tau regime), not --alpha")
        else:
            if self.alpha is None or self.tau is not None:
                raise ConfigError(f"{self.experiment} needs --alpha (weak non-Hermiticity), not --tau")
        if self.target_eigenvalue_count < 0:
            raise ConfigError("target_eigenvalue_count must be non-negative")
        if self.worker_count < 1:
            raise ConfigError("worker_count must be at least 1")
        if self.chunk_size < 1:
            raise ConfigError("chunk_size must be at least 1")
        if self.exclusion not in EXCLUSIONS:
            raise ConfigError(f"exclusion must be one of {EXCLUSIONS}")
        if not (self.s_r[1] > self.s_r[0]):
            raise ConfigError("S_R must satisfy lo < hi")
        if self.max_matrices is not None and self.max_matrices < 0:
            raise ConfigError("max_matrices must be non-negative")
        self.spec()
        axes = self.axes()
        needed = {"snh_density": ("eta",), "snh_overlap": ("eta_tilde",),
                  "wnh_density": ("x", "y"), "wnh_overlap": ("x", "y")}[self.experiment]
        missing = [k for k in needed if k not in axes]
        if missing:
            raise ConfigError(f"bins spec for {self.experiment} lacks {missing}")

    def spec(self) -> EnsembleSpec:
        if self.experiment in SNH_EXPERIMENTS:
            return EnsembleSpec.fixed(self.ensemble, self.n, self.tau)
        return EnsembleSpec.wnh(self.ensemble, self.n, self.alpha)

    def axes(self) -> Dict[str, Axis]:
        return parse_bins(self.bins)

    def matrix_limit(self) -> int:
        if self.max_matrices is not None:
            return self.max_matrices
        return max(2000, int(1000 * self.target_eigenvalue_count / self.n))

    def resolved(self) -> dict:
        """Everything that determines the outputs. Execution details (worker
        count, output directory) are left out so reruns compare byte for byte."""
        d = asdict(self)
        d.pop("worker_count")
        d.pop("output_dir")
        d["s_r"] = list(self.s_r)
        d["effective_tau"] = self.spec().tau
        d["kappa"] = self.spec().kappa
        return d

    def to_json(self) -> str:
        return json.dumps(self.resolved(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str, **overrides) -> "ExperimentConfig":
        d = json.loads(text)
        d.pop("effective_tau", None)
        d.pop("kappa", None)
        d["s_r"] = tuple(d.get("s_r", (-5.0, 1.0)))
        d.update(overrides)
        return cls(**d)

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


def default_config(experiment: str, ensemble: str, *, tau=None, alpha=None, n=None,
                   eigenvalues=None, paper_scale=False, **kw) -> ExperimentConfig:
    table = PAPER_SCALE if paper_scale else DESK_SCALE
    if experiment not in table:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {experiment!r}")
    n0, count0 = table[experiment]
    return ExperimentConfig(experiment=experiment, ensemble=ensemble,
                            n=n0 if n is None else int(n), tau=tau, alpha=alpha,
                            target_eigenvalue_count=count0 if eigenvalues is None else int(eigenvalues),
                            **kw)
