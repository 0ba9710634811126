"""Per-matrix analyses and the deterministic sampling map-reduce.

A matrix is identified by its stream index. Streams are processed in fixed
chunks; each chunk's partial statistics merge exactly, and a run that stops
on an eigenvalue budget always stops after the same chunk, whatever the
number of workers.
"""

from __future__ import annotations

import math
import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from ..ensembles import SeededStream, sample
from ..errors import DegenerateSpectrumError, EllipticEdgeError, WorkerError
from ..spectral import (GAP_FLOOR, SnhEdgeFrame, WnhFrame, arnoldi_edge_eigs, classify_real,
                        complex_schur, min_gap, schur_self_overlaps)
from ..theory_asymptotic import snh_weight
from .config import ExperimentConfig
from .histogram import Histogram, SampleSet, WindowedMean

WNH_WINDOW = 0.1


@dataclass
class Accounting:
    total: int = 0
    retained: int = 0
    excluded: int = 0
    real: int = 0
    discarded: int = 0

    def merge(self, other: "Accounting") -> "Accounting":
        return Accounting(self.total + other.total, self.retained + other.retained,
                          self.excluded + other.excluded, self.real + other.real,
                          self.discarded + other.discarded)

    def balanced(self) -> bool:
        return self.retained + self.excluded + self.real + self.discarded == self.total

    def as_dict(self) -> dict:
        return {"total": self.total, "retained": self.retained, "excluded": self.excluded,
                "real_classified": self.real, "discarded_degenerate": self.discarded}


@dataclass
class Partial:
    """Mergeable statistics for a set of sampled matrices."""

    stats: Dict[str, object] = field(default_factory=dict)
    accounting: Dict[str, Accounting] = field(default_factory=dict)
    matrices: int = 0
    discarded_matrices: int = 0
    budget: int = 0

    def merge(self, other: "Partial") -> "Partial":
        stats = {k: v.merge(other.stats[k]) for k, v in self.stats.items()}
        acc = {k: v.merge(other.accounting[k]) for k, v in self.accounting.items()}
        return Partial(stats, acc, self.matrices + other.matrices,
                       self.discarded_matrices + other.discarded_matrices,
                       self.budget + other.budget)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Partial) and self.stats == other.stats
                and self.accounting == other.accounting and self.matrices == other.matrices
                and self.discarded_matrices == other.discarded_matrices
                and self.budget == other.budget)


class SnhAnalysis:
    """Strong non-Hermiticity edge protocol: project complex eigenvalues onto
    the ellipse, histogram eta > 0 and average weighted self-overlaps in
    windows of eta_tilde with half-width 1/sqrt(N)."""

    def __init__(self, config: ExperimentConfig, density: bool = True, overlap: bool = False,
                 eta_axis=None, eta_tilde_axis=None):
        self.config = config
        self.spec = config.spec()
        self.tau = self.spec.tau
        self.n = self.spec.n
        self.density = density
        self.overlap = overlap
        self.frame = SnhEdgeFrame(self.n, self.tau)
        self.eta_edges = eta_axis.edges() if density else None
        self.centers = eta_tilde_axis.points() if overlap else None
        self.half_width = 1.0 / math.sqrt(self.n)
        self.keys = [k for k, on in (("snh_density", density), ("snh_overlap", overlap)) if on]

    def empty(self) -> Partial:
        stats = {}
        if self.density:
            stats["eta"] = Histogram(self.eta_edges)
        if self.overlap:
            stats["overlap"] = WindowedMean(self.centers, self.half_width)
        return Partial(stats, {k: Accounting() for k in self.keys})

    def analyze(self, index: int) -> Partial:
        cfg = self.config
        out = self.empty()
        out.matrices = 1
        for acc in out.accounting.values():
            acc.total = self.n
        X = sample(self.spec, SeededStream(cfg.master_seed, index))
        if self.overlap:
            T = complex_schur(X)
            w = np.diag(T).copy()
        else:
            w = np.linalg.eigvals(X)
            if not np.all(np.isfinite(w)):
                raise EllipticEdgeError("eigenvalue solver returned non-finite values")
        if min_gap(w) < GAP_FLOOR * float(np.linalg.norm(X)):
            for acc in out.accounting.values():
                acc.discarded = self.n
            out.discarded_matrices = 1
            return out
        if self.spec.kind == "real":
            is_real = classify_real(w, cfg.real_tol_factor * math.sqrt(self.n))
        else:
            is_real = np.zeros(w.size, dtype=bool)
        n_real = int(is_real.sum())
        cplx = np.nonzero(~is_real)[0]
        z = w[cplx]
        s = 1.0 - self.tau ** 2
        # the density needs only points outside the ellipse
        reach = 0.0
        if self.overlap:
            reach = max(reach, (np.max(np.abs(self.centers)) + self.half_width) * math.sqrt(s))
        dist_lb = self.frame.distance_bound(z)
        inside = self.frame.elliptic_radius(z) < 1.0
        cand = np.nonzero(~inside | (dist_lb <= reach))[0]
        eta = np.full(z.size, np.nan)
        theta = np.full(z.size, np.nan)
        ok = np.zeros(z.size, dtype=bool)
        if cand.size:
            e, t, o = self.frame.project(z[cand])
            eta[cand], theta[cand], ok[cand] = e, t, o
        if self.spec.kind == "real":
            if cfg.exclusion == "imag":
                keep = np.abs(z.imag) >= cfg.exclusion_threshold
            else:
                keep = ok & (np.abs(np.sin(np.where(ok, theta, 0.0))) >= cfg.exclusion_threshold)
        else:
            keep = np.ones(z.size, dtype=bool)
        good = keep & ok
        if self.density:
            sel = good & (eta > 0.0)
            out.stats["eta"].fill(eta[sel])
            acc = out.accounting["snh_density"]
            acc.real = n_real
            acc.retained = int(sel.sum())
            acc.excluded = self.n - n_real - acc.retained
            out.budget = acc.retained
        if self.overlap:
            et = np.where(good, eta, np.nan) / math.sqrt(s)
            member = np.zeros(z.size, dtype=bool)
            member[good] = self.stats_member(et[good])
            sel = np.nonzero(member)[0]
            acc = out.accounting["snh_overlap"]
            acc.real = n_real
            acc.retained = int(sel.size)
            acc.excluded = self.n - n_real - acc.retained
            if sel.size:
                ov = schur_self_overlaps(T, cplx[sel])
                vals = ov * snh_weight(theta[sel], self.tau, self.n)
                out.stats["overlap"].fill(et[sel], vals)
            if not self.density:
                out.budget = acc.retained
        return out

    def stats_member(self, coords) -> np.ndarray:
        if coords.size == 0:
            return np.zeros(0, dtype=bool)
        return (np.abs(coords[:, None] - self.centers[None, :]) <= self.half_width).any(axis=1)


class WnhAnalysis:
    """Weak non-Hermiticity edge protocol at both real-axis edges; the left
    edge is mirrored onto the right one."""

    def __init__(self, config: ExperimentConfig, density: bool = True, overlap: bool = False,
                 x_axis=None, y_axis=None, ox_axis=None, oy_axis=None):
        self.config = config
        self.spec = config.spec()
        self.n = self.spec.n
        self.kind = self.spec.kind
        self.density = density
        self.overlap = overlap
        self.frame = WnhFrame(self.n)
        self.s_r = config.s_r
        self.x_edges = x_axis.edges() if density else None
        self.y_edges = y_axis.edges() if density else None
        self.ox_centers = ox_axis.points() if overlap and self.kind == "complex" else None
        self.oy_centers = oy_axis.points() if overlap and self.kind == "real" else None
        x_min = self.s_r[0]
        if self.ox_centers is not None:
            x_min = min(x_min, float(self.ox_centers.min()) - WNH_WINDOW)
        self.x_min = x_min
        self.threshold = 2.0 * math.sqrt(self.n) + x_min * self.n ** (-1.0 / 6.0)
        if self.threshold <= 0:
            raise EllipticEdgeError("edge window reaches past the origin; raise the lower x limit")
        self.keys = [k for k, on in (("wnh_density", density), ("wnh_overlap", overlap)) if on]

    def empty(self) -> Partial:
        stats = {}
        if self.density:
            stats["x"] = Histogram(self.x_edges)
            stats["y"] = Histogram(self.y_edges)
            stats["x_samples"] = SampleSet()
        if self.overlap:
            centers = self.ox_centers if self.kind == "complex" else self.oy_centers
            stats["overlap"] = WindowedMean(centers, WNH_WINDOW)
        return Partial(stats, {k: Accounting() for k in self.keys})

    def analyze(self, index: int) -> Partial:
        cfg = self.config
        out = self.empty()
        out.matrices = 1
        for acc in out.accounting.values():
            acc.total = self.n
        stream = SeededStream(cfg.master_seed, index)
        X = sample(self.spec, stream)
        v0 = stream.generator(substream=1).standard_normal(self.n)
        if self.kind == "complex":
            v0 = v0.astype(complex)
        try:
            w, ov = arnoldi_edge_eigs(X, self.threshold, v0=v0, vectors=self.overlap)
        except DegenerateSpectrumError:
            for acc in out.accounting.values():
                acc.discarded = self.n
            out.discarded_matrices = 1
            return out
        if self.kind == "real":
            is_real = classify_real(w, cfg.real_tol_factor * math.sqrt(self.n)) if w.size else np.zeros(0, bool)
        else:
            is_real = np.zeros(w.size, dtype=bool)
        right = w.real >= 0.0
        x = np.empty(w.size)
        y = np.empty(w.size)
        if w.size:
            xr, yr = self.frame.coords(w, "right")
            xl, yl = self.frame.coords(w, "left")
            x = np.where(right, xr, xl)
            y = np.where(right, yr, yl)
        in_sr = (x >= self.s_r[0]) & (x <= self.s_r[1])
        cplx = ~is_real
        n_real = int(is_real.sum())
        if self.density:
            sel = cplx & in_sr
            out.stats["x"].fill(x[sel])
            out.stats["y"].fill(np.abs(y[sel]))
            out.stats["x_samples"].add(x[sel])
            acc = out.accounting["wnh_density"]
            acc.real = n_real
            acc.retained = int(sel.sum())
            acc.excluded = self.n - n_real - acc.retained
            out.budget = acc.retained
        if self.overlap:
            wm = out.stats["overlap"]
            if self.kind == "complex":
                member = wm.membership(x).any(axis=1) if w.size else np.zeros(0, bool)
                sel = cplx & member
                wm.fill(x[sel], self.n ** (2.0 / 3.0) * (ov[sel] - 1.0))
            else:
                member = wm.membership(np.abs(y)).any(axis=1) if w.size else np.zeros(0, bool)
                sel = cplx & in_sr & member
                wm.fill(np.abs(y[sel]), ov[sel])
            acc = out.accounting["wnh_overlap"]
            acc.real = n_real
            acc.retained = int(sel.sum())
            acc.excluded = self.n - n_real - acc.retained
            if not self.density:
                out.budget = acc.retained
        return out


def _run_chunk(analysis, start: int, stop: int) -> Partial:
    total = analysis.empty()
    for index in range(start, stop):
        try:
            part = analysis.analyze(index)
        except WorkerError:
            raise
        except Exception as exc:
            raise WorkerError(f"stream {index} failed: {type(exc).__name__}: {exc}", index) from exc
        total = total.merge(part)
    return total


def sample_pipeline(analysis, stream_range: Tuple[int, int], *, workers: int = 1,
                    chunk_size: int = 8, target: Optional[int] = None) -> Partial:
    """Map the analysis over stream indices in [start, stop) and merge.

    With ``target`` the run stops after the first chunk at which the merged
    eigenvalue budget reaches the target; chunk boundaries are fixed by
    ``chunk_size`` alone, so the result does not depend on ``workers``.
    """
    start, stop = int(stream_range[0]), int(stream_range[1])
    chunks = [(a, min(a + chunk_size, stop)) for a in range(start, stop, chunk_size)]
    merged = analysis.empty()
    if not chunks:
        return merged

    def done(m):
        return target is not None and m.budget >= target

    if workers <= 1:
        for a, b in chunks:
            merged = merged.merge(_run_chunk(analysis, a, b))
            if done(merged):
                break
        return merged

    ctx = mp.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        pending = {}
        nxt = 0
        cur = 0
        in_flight = 2 * workers
        while cur < len(chunks):
            while nxt < len(chunks) and nxt - cur < in_flight:
                pending[nxt] = pool.submit(_run_chunk, analysis, *chunks[nxt])
                nxt += 1
            part = pending.pop(cur).result()
            merged = merged.merge(part)
            cur += 1
            if done(merged):
                for fut in pending.values():
                    fut.cancel()
                break
    return merged
