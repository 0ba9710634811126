"""Experiment drivers: sampling runs, theory curves and statistical checks."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from ..errors import ConfigError, InsufficientSamplesError
from ..specfun import erfc
from ..theory_asymptotic import (conditional_wnh_eginoe, rho_snh_edge_normalized,
                                 shifted_conditional_wnh_eginue, weighted_conditional_snh,
                                 wnh_marginals)
from .config import DEFAULT_BINS, ExperimentConfig, parse_bins
from .histogram import COUNT_FLOOR, BinnedConditionalMean, Histogram
from .pipeline import Partial, SnhAnalysis, WnhAnalysis, sample_pipeline

SE_BAND = 3.0
P_MIN = 0.01
FIRST_BIN_RATIO = 0.1
# finite-N bias of the complex-ensemble WNH overlap grows outside this x range
WNH_UE_CHECK_RANGE = (-2.0, 0.0)
REMAINDER_MIN_EXPECTED = 5.0

WEIGHTING_NOTE = ("each sampled self-overlap is multiplied by its own "
                  "1/(2 sqrt(N (1-tau^2) (1 + tau^2 - 2 tau cos 2theta))) before averaging")


@dataclass
class Table:
    columns: Tuple[str, ...]
    rows: List[tuple]


@dataclass
class ResultBundle:
    config: ExperimentConfig
    tables: Dict[str, Table]
    summary: dict
    wall_time: float = 0.0
    samples: Dict[str, np.ndarray] = field(default_factory=dict)
    binned: Optional[BinnedConditionalMean] = None

    @property
    def passed(self) -> bool:
        return bool(self.summary["acceptance"]["passed"])


# Statistics.

def chi_square(hist: Histogram, masses, total: float, floor: int = COUNT_FLOOR) -> dict:
    """Pearson chi-square of histogram counts against expected bin masses.

    Bins with fewer than ``floor`` counts, and all under/overflow, are pooled
    into one remainder cell. The remainder enters the statistic when its
    expectation reaches 5; the degrees of freedom are cells - 1.
    """
    counts = np.array(hist.counts)
    masses = np.asarray(masses, dtype=float)
    used = counts >= floor
    obs = list(counts[used])
    exp = list(total * masses[used])
    rem_obs = total - float(np.sum(counts[used]))
    rem_exp = total * max(0.0, 1.0 - float(np.sum(masses[used])))
    pooled = rem_exp >= REMAINDER_MIN_EXPECTED
    if pooled:
        obs.append(rem_obs)
        exp.append(rem_exp)
    obs, exp = np.array(obs), np.array(exp)
    cells = obs.size
    if cells < 2 or np.any(exp <= 0):
        return {"statistic": math.nan, "dof": 0, "p_value": math.nan, "bins_used": int(used.sum()),
                "remainder_pooled": pooled}
    stat = float(np.sum((obs - exp) ** 2 / exp))
    dof = cells - 1
    return {"statistic": stat, "dof": dof, "p_value": float(stats.chi2.sf(stat, dof)),
            "bins_used": int(used.sum()), "remainder_pooled": pooled}


def band_check(binned: BinnedConditionalMean, theory, band: float = SE_BAND,
               select=None) -> dict:
    """Per-bin |mean - theory| <= band * std_error over defined bins."""
    means = np.array(binned.means)
    se = np.array(binned.std_errors)
    th = np.asarray(theory, dtype=float)
    mask = np.array(binned.defined)
    if select is not None:
        mask &= np.asarray(select, dtype=bool)
    dev = np.where(mask, np.abs(means - th) / np.where(se > 0, se, np.inf), np.nan)
    ok = bool(mask.any()) and bool(np.all(dev[mask] <= band))
    return {"passed": ok, "bins_checked": int(mask.sum()),
            "max_deviation_se": float(np.nanmax(dev)) if mask.any() else math.nan}


def compare_binned(a: BinnedConditionalMean, b: BinnedConditionalMean,
                   band: float = SE_BAND) -> dict:
    """Two binned curves agree within band * combined standard error."""
    if a.centers != b.centers:
        raise ConfigError("binned curves use different windows")
    ma, mb = np.array(a.means), np.array(b.means)
    comb = np.hypot(np.array(a.std_errors), np.array(b.std_errors))
    mask = np.array(a.defined) & np.array(b.defined)
    dev = np.where(mask, np.abs(ma - mb) / np.where(comb > 0, comb, np.inf), np.nan)
    ok = bool(mask.any()) and bool(np.all(dev[mask] <= band))
    return {"passed": ok, "bins_checked": int(mask.sum()),
            "max_deviation_se": float(np.nanmax(dev)) if mask.any() else math.nan}


def ks_compare(a: ResultBundle, b: ResultBundle) -> dict:
    """Two-sample Kolmogorov-Smirnov test on the raw x samples."""
    xa, xb = a.samples["x"], b.samples["x"]
    res = stats.ks_2samp(xa, xb)
    return {"statistic": float(res.statistic), "p_value": float(res.pvalue),
            "sizes": [int(xa.size), int(xb.size)]}


def snh_bin_masses(edges, tau: float) -> np.ndarray:
    """Mass of the normalized eta > 0 edge density in each bin, in closed form."""
    c = math.sqrt(2.0 / (1.0 - tau * tau))

    def anti(u):
        # antiderivative of erfc(u)
        return u * erfc(u) - np.exp(-u * u) / math.sqrt(math.pi)

    u = c * np.clip(np.asarray(edges, dtype=float), 0.0, None)
    return np.diff(anti(u)) * math.sqrt(math.pi)


# Runs.

def _rows(centers, values, errors, counts):
    return [(float(c), float(v), float(e), int(n)) for c, v, e, n in zip(centers, values, errors, counts)]


def _hist_table(hist: Histogram, total: float) -> Table:
    value, err = hist.density(total)
    return Table(("center", "value", "std_error", "count"),
                 _rows(hist.centers, value, err, hist.raw_counts))


def _theory_table(grid, values) -> Table:
    return Table(("grid", "value"), [(float(g), float(v)) for g, v in zip(grid, values)])


def _binned_table(b: BinnedConditionalMean) -> Table:
    return Table(("center", "value", "std_error", "count"),
                 _rows(b.centers, b.means, b.std_errors, b.counts))


def _collect(config: ExperimentConfig, analysis, workers: Optional[int] = None) -> Partial:
    limit = config.matrix_limit()
    if limit <= 0:
        raise InsufficientSamplesError("zero matrices sampled; nothing to report", 0, 0)
    return sample_pipeline(analysis, (0, limit), workers=workers or config.worker_count,
                           chunk_size=config.chunk_size, target=config.target_eigenvalue_count)


def _base_summary(config: ExperimentConfig, part: Partial, key: str, budget_source: str) -> dict:
    acc = part.accounting[key]
    if not acc.balanced():
        raise AssertionError(f"eigenvalue accounting does not balance: {acc.as_dict()}")
    if part.matrices == 0:
        raise InsufficientSamplesError("zero matrices sampled; nothing to report", 0, 0)
    rate = acc.retained / acc.total if acc.total else 0.0
    if acc.retained < config.min_retained:
        raise InsufficientSamplesError(
            f"{key}: retained {acc.retained} of {acc.total} eigenvalues "
            f"(retention rate {rate:.3g}); at least {config.min_retained} are needed",
            acc.retained, acc.total)
    return {
        "experiment": key,
        "ensemble": config.ensemble,
        "seed_lineage": {"master_seed": config.master_seed, "stream_start": 0,
                         "stream_stop": part.matrices, "chunk_size": config.chunk_size},
        "matrices_sampled": part.matrices,
        "matrices_discarded_degenerate": part.discarded_matrices,
        "eigenvalues": acc.as_dict(),
        "retention_rate": rate,
        "budget": {"source": budget_source, "target": config.target_eigenvalue_count,
                   "reached": part.budget, "target_met": part.budget >= config.target_eigenvalue_count},
    }


def _finish(summary: dict, checks: Dict[str, bool]) -> dict:
    summary["acceptance"] = {"checks": checks, "passed": all(checks.values())}
    return summary


def _snh_density_bundle(config, part, wall, budget_source="snh_density") -> ResultBundle:
    summary = _base_summary(config, part, "snh_density", budget_source)
    hist = part.stats["eta"]
    total = summary["eigenvalues"]["retained"]
    chi = chi_square(hist, snh_bin_masses(hist.edges, config.tau), total)
    summary["statistics"] = {"chi_square": chi}
    summary["exclusion"] = ({"rule": config.exclusion, "threshold": config.exclusion_threshold}
                            if config.ensemble == "real" else None)
    _finish(summary, {"chi_square_p_above_0.01": bool(chi["p_value"] > P_MIN)})
    tables = {"histogram.csv": _hist_table(hist, total),
              "theory.csv": _theory_table(hist.centers, rho_snh_edge_normalized(hist.centers, config.tau))}
    return ResultBundle(config, tables, summary, wall)


def _snh_overlap_bundle(config, part, wall, budget_source="snh_overlap") -> ResultBundle:
    summary = _base_summary(config, part, "snh_overlap", budget_source)
    binned = part.stats["overlap"].result()
    theory = weighted_conditional_snh(np.array(binned.centers))
    check = band_check(binned, theory)
    summary["statistics"] = {"band_check": check, "window_half_width": part.stats["overlap"].half_width}
    summary["weighting"] = WEIGHTING_NOTE
    summary["exclusion"] = ({"rule": config.exclusion, "threshold": config.exclusion_threshold}
                            if config.ensemble == "real" else None)
    _finish(summary, {"within_3_se_every_bin": check["passed"]})
    tables = {"binned.csv": _binned_table(binned),
              "theory.csv": _theory_table(binned.centers, theory)}
    return ResultBundle(config, tables, summary, wall, binned=binned)


def run_snh(config: ExperimentConfig, overlap_bins: Optional[str] = None,
            workers: Optional[int] = None) -> Tuple[ResultBundle, ResultBundle]:
    """Density and weighted overlap from a single sampling pass. The pass
    stops on the density's eigenvalue budget."""
    if config.experiment != "snh_density":
        raise ConfigError("run_snh takes the snh_density config; overlap bins are passed separately")
    oconf = config.with_(experiment="snh_overlap", bins=overlap_bins or DEFAULT_BINS["snh_overlap"])
    analysis = SnhAnalysis(config, density=True, overlap=True, eta_axis=config.axes()["eta"],
                           eta_tilde_axis=oconf.axes()["eta_tilde"])
    t0 = time.perf_counter()
    part = _collect(config, analysis, workers)
    wall = time.perf_counter() - t0
    return (_snh_density_bundle(config, part, wall),
            _snh_overlap_bundle(oconf, part, wall, budget_source="snh_density"))


def run_snh_density(config: ExperimentConfig, workers: Optional[int] = None) -> ResultBundle:
    if config.experiment != "snh_density":
        raise ConfigError("run_snh_density needs experiment snh_density")
    analysis = SnhAnalysis(config, density=True, eta_axis=config.axes()["eta"])
    t0 = time.perf_counter()
    part = _collect(config, analysis, workers)
    return _snh_density_bundle(config, part, time.perf_counter() - t0)


def run_snh_overlap(config: ExperimentConfig, workers: Optional[int] = None) -> ResultBundle:
    if config.experiment != "snh_overlap":
        raise ConfigError("run_snh_overlap needs experiment snh_overlap")
    analysis = SnhAnalysis(config, density=False, overlap=True,
                           eta_tilde_axis=config.axes()["eta_tilde"])
    t0 = time.perf_counter()
    part = _collect(config, analysis, workers)
    return _snh_overlap_bundle(config, part, time.perf_counter() - t0)


def _wnh_density_bundle(config, part, wall, budget_source="wnh_density") -> ResultBundle:
    summary = _base_summary(config, part, "wnh_density", budget_source)
    xh, yh = part.stats["x"], part.stats["y"]
    total = summary["eigenvalues"]["retained"]
    kappa = config.spec().kappa
    xm, ym = wnh_marginals(config.ensemble, kappa, config.s_r)
    # the y histogram holds |y|, whose density is twice the symmetric y-marginal
    chi_x = chi_square(xh, xm.bin_masses(xh.edges), total)
    chi_y = chi_square(yh, 2.0 * ym.bin_masses(yh.edges), total)
    ycounts = yh.raw_counts
    peak = max(ycounts) if ycounts else 0
    ratio = ycounts[0] / peak if peak else math.nan
    summary["statistics"] = {"chi_square_x": chi_x, "chi_square_y": chi_y,
                             "first_y_bin_over_peak": ratio}
    if config.ensemble == "complex":
        checks = {"y_chi_square_p_above_0.01": bool(chi_y["p_value"] > P_MIN)}
    else:
        checks = {"first_y_bin_below_10pct_of_peak": bool(ratio < FIRST_BIN_RATIO)}
    _finish(summary, checks)
    tables = {"histogram.csv": _hist_table(xh, total),
              "histogram_y.csv": _hist_table(yh, total),
              "theory.csv": _theory_table(xh.centers, xm(xh.centers)),
              "theory_y.csv": _theory_table(yh.centers, 2.0 * ym(yh.centers))}
    return ResultBundle(config, tables, summary, wall, samples={"x": part.stats["x_samples"].values()})


def _wnh_overlap_bundle(config, part, wall, budget_source="wnh_overlap") -> ResultBundle:
    summary = _base_summary(config, part, "wnh_overlap", budget_source)
    wm = part.stats["overlap"]
    binned = wm.result()
    kappa = config.spec().kappa
    centers = np.array(binned.centers)
    if config.ensemble == "complex":
        theory = np.array([shifted_conditional_wnh_eginue(c, kappa) for c in centers])
        lo, hi = WNH_UE_CHECK_RANGE
        check = band_check(binned, theory, select=(centers >= lo) & (centers <= hi))
        full = band_check(binned, theory)
        summary["statistics"] = {"band_check": check, "band_check_all_bins": full,
                                 "checked_x_range": [lo, hi], "window_half_width": wm.half_width,
                                 "value": "N^(2/3) (O_nn - 1) binned by x"}
        checks = {"within_3_se_on_checked_range": check["passed"]}
    else:
        theory = conditional_wnh_eginoe(centers, kappa)
        check = band_check(binned, theory)
        defined = np.array(binned.defined)
        means = np.array(binned.means)
        at_least_one = bool(np.all(means[defined] >= 1.0)) if defined.any() else False
        summary["statistics"] = {"band_check": check, "window_half_width": wm.half_width,
                                 "value": "O_nn binned by |y| for x in S_R"}
        checks = {"within_3_se_every_bin": check["passed"], "every_mean_at_least_1": at_least_one}
    _finish(summary, checks)
    tables = {"binned.csv": _binned_table(binned), "theory.csv": _theory_table(centers, theory)}
    return ResultBundle(config, tables, summary, wall, binned=binned)


def _wnh_axes(config, overlap_bins):
    axes = config.axes()
    oaxes = parse_bins(overlap_bins or DEFAULT_BINS["wnh_overlap"])
    return axes, oaxes


def run_wnh(config: ExperimentConfig, overlap_bins: Optional[str] = None,
            workers: Optional[int] = None) -> Tuple[ResultBundle, ResultBundle]:
    """Density and overlap from one pass, stopping on the density budget."""
    if config.experiment != "wnh_density":
        raise ConfigError("run_wnh takes the wnh_density config; overlap bins are passed separately")
    oconf = config.with_(experiment="wnh_overlap", bins=overlap_bins or DEFAULT_BINS["wnh_overlap"])
    axes, oaxes = config.axes(), oconf.axes()
    analysis = WnhAnalysis(config, density=True, overlap=True, x_axis=axes["x"], y_axis=axes["y"],
                           ox_axis=oaxes["x"], oy_axis=oaxes["y"])
    t0 = time.perf_counter()
    part = _collect(config, analysis, workers)
    wall = time.perf_counter() - t0
    return (_wnh_density_bundle(config, part, wall),
            _wnh_overlap_bundle(oconf, part, wall, budget_source="wnh_density"))


def run_wnh_density(config: ExperimentConfig, workers: Optional[int] = None) -> ResultBundle:
    if config.experiment != "wnh_density":
        raise ConfigError("run_wnh_density needs experiment wnh_density")
    axes = config.axes()
    analysis = WnhAnalysis(config, density=True, x_axis=axes["x"], y_axis=axes["y"])
    t0 = time.perf_counter()
    part = _collect(config, analysis, workers)
    return _wnh_density_bundle(config, part, time.perf_counter() - t0)


def run_wnh_overlap(config: ExperimentConfig, workers: Optional[int] = None) -> ResultBundle:
    if config.experiment != "wnh_overlap":
        raise ConfigError("run_wnh_overlap needs experiment wnh_overlap")
    axes = config.axes()
    analysis = WnhAnalysis(config, density=False, overlap=True, ox_axis=axes["x"], oy_axis=axes["y"])
    t0 = time.perf_counter()
    part = _collect(config, analysis, workers)
    return _wnh_overlap_bundle(config, part, time.perf_counter() - t0)


RUNNERS = {
    "snh_density": run_snh_density,
    "snh_overlap": run_snh_overlap,
    "wnh_density": run_wnh_density,
    "wnh_overlap": run_wnh_overlap,
}


def run_experiment(config: ExperimentConfig, workers: Optional[int] = None) -> ResultBundle:
    return RUNNERS[config.experiment](config, workers)
