"""Acceptance criteria 1 to 7.

Each criterion is computed once in a module fixture; the sub-checks record
their outcome in ``acceptance_log`` so the session ends with a per-criterion
summary, then assert.
"""

import math
import time

import numpy as np
import pytest

from elliptic_edge.ensembles import EnsembleSpec, SeededStream, sample
from elliptic_edge.harness import default_config, emit, run_experiment, run_snh, run_wnh_density
from elliptic_edge.harness.experiments import compare_binned, ks_compare
from elliptic_edge.specfun import airy_ai, airy_ai_prime, airy_tail_I0, hermite_he
from elliptic_edge.spectral import eigen_biorthogonal, self_overlaps, spectral_sample
from elliptic_edge.theory_asymptotic import (conditional_wnh_eginoe, overlap_snh_edge, rho_snh_edge,
                                             shifted_conditional_wnh_eginue)
from elliptic_edge.theory_finite import FiniteNContext, conditional_overlap, finite_n_profile

from acceptance_log import record

pytestmark = pytest.mark.acceptance

ENSEMBLES = ("complex", "real")


def check(criterion, name, passed, detail=""):
    record(criterion, name, passed, detail)
    assert passed, f"criterion {criterion}: {name} [{detail}]"


# 1. Overlap algebra

C1_SIZES = (8, 32, 64)
C1_TAUS = (0.0, 0.5, 0.9)
C1_DRAWS = 200


@pytest.fixture(scope="module")
def c1():
    out = {}
    t0 = time.perf_counter()
    for e, kind in enumerate(ENSEMBLES):
        for n in C1_SIZES:
            for tau in C1_TAUS:
                spec = EnsembleSpec.fixed(kind, n, tau)
                lo, row, sym = math.inf, 0.0, 0.0
                for i in range(C1_DRAWS):
                    X = sample(spec, SeededStream(101 + e, 1000 * n + int(10 * tau) * 200 + i))
                    w, vr, vl = eigen_biorthogonal(X)
                    lo = min(lo, float(self_overlaps(vl, vr).min()))
                    full = (vl.conj().T @ vl) * (vr.conj().T @ vr).T
                    row = max(row, float(np.max(np.abs(full.sum(axis=1) - 1.0))))
                    H = 0.5 * (X + X.conj().T)
                    w, vr, vl = eigen_biorthogonal(H)
                    sym = max(sym, float(np.max(np.abs(self_overlaps(vl, vr) - 1.0))))
                out[kind, n, tau] = (lo, row, sym)
    out["wall"] = time.perf_counter() - t0
    return out


@pytest.mark.parametrize("kind", ENSEMBLES)
def test_c1_self_overlap_floor(c1, kind):
    worst = min(c1[kind, n, t][0] for n in C1_SIZES for t in C1_TAUS)
    check(1, f"{kind}: every O_nn >= 1 - 1e-8", worst >= 1 - 1e-8, f"min O_nn = {worst:.12g}")


@pytest.mark.parametrize("kind", ENSEMBLES)
def test_c1_row_sums(c1, kind):
    worst = max(c1[kind, n, t][1] for n in C1_SIZES for t in C1_TAUS)
    check(1, f"{kind}: row sums 1 +- 1e-7", worst <= 1e-7, f"max |sum - 1| = {worst:.3e}")


@pytest.mark.parametrize("kind", ENSEMBLES)
def test_c1_symmetric_inputs(c1, kind):
    worst = max(c1[kind, n, t][2] for n in C1_SIZES for t in C1_TAUS)
    check(1, f"{kind}: symmetric inputs O_nn = 1 +- 1e-10", worst <= 1e-10, f"max |O - 1| = {worst:.3e}")


def test_c1_runtime(c1):
    check(1, "runtime < 60 s", c1["wall"] < 60, f"{c1['wall']:.1f} s")


# 2. Finite-N formulas against Monte Carlo

C2_N, C2_TAU, C2_MATRICES, C2_CELL, C2_MIN_HITS = 16, 0.5, 62_500, 0.5, 500


def _cell_theory(ctx, cx, cy):
    # Gauss-Legendre 6x6 averages of the density and overlap over each cell
    nodes, weights = np.polynomial.legendre.leggauss(6)
    h = C2_CELL / 2
    wts = np.outer(weights, weights).ravel() / 4.0
    pts = ((cx[:, None] + h) + h * np.repeat(nodes, 6)[None, :]) \
        + 1j * ((cy[:, None] + h) + h * np.tile(nodes, 6)[None, :])
    lr, lo = finite_n_profile(ctx, pts)
    return np.exp(lr) @ wts, np.exp(lo) @ wts


@pytest.fixture(scope="module")
def c2():
    out = {}
    t0 = time.perf_counter()
    for e, kind in enumerate(ENSEMBLES):
        spec = EnsembleSpec.fixed(kind, C2_N, C2_TAU)
        zs, ovs = [], []
        for i in range(C2_MATRICES):
            s = spectral_sample(sample(spec, SeededStream(201 + e, i)))
            keep = ~s.is_real_eigenvalue if s.is_real_eigenvalue is not None else slice(None)
            zs.append(s.eigenvalues[keep])
            ovs.append(s.self_overlaps[keep])
        z, ov = np.concatenate(zs), np.concatenate(ovs)
        ix = np.floor(z.real / C2_CELL).astype(np.int64)
        iy = np.floor(z.imag / C2_CELL).astype(np.int64)
        cells, inverse, hits = np.unique(np.stack([ix, iy], axis=1), axis=0,
                                         return_inverse=True, return_counts=True)
        inverse = inverse.ravel()
        use = hits >= C2_MIN_HITS
        sums = np.bincount(inverse, ov)
        sq = np.bincount(inverse, ov * ov)
        mean = sums / hits
        std = np.sqrt(np.maximum(sq / hits - mean * mean, 0.0) * hits / np.maximum(hits - 1, 1))
        cx, cy = cells[use, 0] * C2_CELL, cells[use, 1] * C2_CELL
        rho, ovl = _cell_theory(FiniteNContext(C2_N, C2_TAU, kind), cx, cy)
        area = C2_CELL * C2_CELL
        emp = hits[use] / (C2_MATRICES * area)
        dev_rho = np.abs(emp - rho) / (np.sqrt(hits[use]) / (C2_MATRICES * area))
        # the real-ensemble overlap density grows like 1/|y| at the axis, so
        # cells touching it have an infinite expected mean
        touching = (cells[use, 1] == 0) | (cells[use, 1] == -1) if kind == "real" else np.zeros(cy.size, bool)
        target = np.where(touching, np.inf, ovl / rho)
        dev_ovl = np.abs(mean[use] - target) / (std[use] / np.sqrt(hits[use]))
        out[kind] = {"cells": int(use.sum()), "dev_rho": dev_rho, "dev_ovl": dev_ovl,
                     "touching": touching, "eigenvalues": int(z.size)}
    out["wall"] = time.perf_counter() - t0
    return out


@pytest.mark.parametrize("kind", ENSEMBLES)
@pytest.mark.parametrize("quantity", ["rho", "ovl"])
def test_c2_cells_within_3_se(c2, kind, quantity):
    dev = c2[kind]["dev_" + quantity]
    frac = float(np.mean(dev <= 3.0))
    label = "density" if quantity == "rho" else "mean self-overlap"
    check(2, f"{kind}: {label} within 3 SE in >= 95% of cells", frac >= 0.95,
          f"{frac:.1%} of {c2[kind]['cells']} cells, max {dev.max():.2f} SE")


def test_c2_real_overlap_finite_cells(c2):
    dev = c2["real"]["dev_ovl"][~c2["real"]["touching"]]
    frac = float(np.mean(dev <= 3.0))
    check(2, "real: mean self-overlap within 3 SE, cells off the axis only", frac >= 0.95,
          f"{frac:.1%} of {dev.size} cells, max {dev.max():.2f} SE")


def test_c2_runtime(c2):
    check(2, "runtime < 10 min", c2["wall"] < 600, f"{c2['wall']:.0f} s")


# 3. Special-function identities

@pytest.fixture(scope="module")
def c3():
    t0 = time.perf_counter()
    h = 1e-3
    xs = np.linspace(-15, 30, 451)
    f = airy_ai_prime
    fd = (f(xs - 2 * h) - 8 * f(xs - h) + 8 * f(xs + h) - f(xs + 2 * h)) / (12 * h)
    ode = float(np.max(np.abs(fd - xs * airy_ai(xs))))
    grid = np.linspace(-10, 10, 201)
    i0 = max(abs(airy_tail_I0(x) - (airy_ai_prime(x) ** 2 - x * airy_ai(x) ** 2)) for x in grid)
    rec = 0.0
    for k in range(1, 120):
        for x in (-6.5 + 1.2j, -0.4, 0.9 - 3j, 5.2 + 0.3j):
            a, b, c = hermite_he(k + 1, x), hermite_he(k, x), hermite_he(k - 1, x)
            rec = max(rec, abs(a - x * b + k * c) / max(abs(a), abs(x * b), abs(k * c)))
    nodes, weights = np.polynomial.hermite_e.hermegauss(40)
    weights = weights / math.sqrt(2 * math.pi)
    integral = 0.0
    for k in range(13):
        for x in (-1.7, 0.0, 0.6, 2.4):
            moment = np.sum(weights * (x + 1j * nodes) ** k)
            integral = max(integral, abs(hermite_he(k, x) - moment) / max(1.0, abs(moment)))
    return {"ode": ode, "i0": i0, "rec": rec, "integral": integral, "wall": time.perf_counter() - t0}


def test_c3_airy_ode(c3):
    check(3, "Airy ODE residual <= 1e-10 on [-15, 30]", c3["ode"] <= 1e-10, f"{c3['ode']:.2e}")


def test_c3_tail_closed_form(c3):
    check(3, "I0 closed form to 1e-8 on [-10, 10]", c3["i0"] <= 1e-8, f"{c3['i0']:.2e}")


def test_c3_hermite(c3):
    check(3, "Hermite recurrence", c3["rec"] <= 1e-10, f"rel {c3['rec']:.2e}")
    check(3, "Hermite integral representation", c3["integral"] <= 1e-8, f"rel {c3['integral']:.2e}")


def test_c3_runtime(c3):
    check(3, "runtime < 10 s", c3["wall"] < 10, f"{c3['wall']:.2f} s")


# 4. SNH edge universality

C4_TAUS = (0.25, 0.75)


@pytest.fixture(scope="module")
def c4():
    out = {}
    t0 = time.perf_counter()
    for kind in ENSEMBLES:
        for tau in C4_TAUS:
            cfg = default_config("snh_density", kind, tau=tau, n=400, eigenvalues=100_000)
            out[kind, tau] = run_snh(cfg)
    out["wall"] = time.perf_counter() - t0
    return out


@pytest.mark.parametrize("kind", ENSEMBLES)
@pytest.mark.parametrize("tau", C4_TAUS)
def test_c4_density_chi_square(c4, kind, tau):
    density, _ = c4[kind, tau]
    chi = density.summary["statistics"]["chi_square"]
    retained = density.summary["eigenvalues"]["retained"]
    check(4, f"{kind} tau={tau}: 10^5 retained, chi-square p > 0.01",
          retained >= 100_000 and chi["p_value"] > 0.01,
          f"retained {retained}, p = {chi['p_value']:.3g}, dof {chi['dof']}")


@pytest.mark.parametrize("kind", ENSEMBLES)
@pytest.mark.parametrize("tau", C4_TAUS)
def test_c4_overlap_band(c4, kind, tau):
    _, overlap = c4[kind, tau]
    band = overlap.summary["statistics"]["band_check"]
    check(4, f"{kind} tau={tau}: weighted overlap within 3 SE in every bin", band["passed"],
          f"{band['bins_checked']} bins, max {band['max_deviation_se']:.2f} SE")


@pytest.mark.parametrize("tau", C4_TAUS)
def test_c4_ensembles_agree(c4, tau):
    res = compare_binned(c4["complex", tau][1].binned, c4["real", tau][1].binned)
    check(4, f"tau={tau}: ensembles agree within combined 3 SE", res["passed"],
          f"{res['bins_checked']} bins, max {res['max_deviation_se']:.2f} SE")


def test_c4_runtime(c4):
    check(4, "runtime < 30 min", c4["wall"] < 1800, f"{c4['wall']:.0f} s")


# 5. Finite-N to asymptotic convergence

@pytest.fixture(scope="module")
def c5():
    out = {}
    t0 = time.perf_counter()
    n, tau = 1000, 0.5
    eta = np.linspace(-2, 2, 81)
    z = 1j * (math.sqrt(n) * (1 - tau) + eta)
    for kind in ENSEMBLES:
        lr, lo = finite_n_profile(FiniteNContext(n, tau, kind), z)
        out[kind, "rho"] = float(np.max(np.abs(np.exp(lr) / rho_snh_edge(eta, tau) - 1)))
        out[kind, "ovl"] = float(np.max(np.abs(np.exp(lo) / math.sqrt(n)
                                               / overlap_snh_edge(eta, math.pi / 2, tau) - 1)))
    n = 4000
    kappa = (math.pi * 0.5) ** 2 / 2
    tau = 1 - kappa / n
    edge = 2 * math.sqrt(n)
    ys = np.linspace(0.2, 1.5, 27)
    oe = FiniteNContext(n, tau, "real")
    e = np.array([conditional_overlap(oe, edge + 1j * y / math.sqrt(n)) for y in ys])
    out["wnh_oe"] = float(np.max(np.abs(e / conditional_wnh_eginoe(ys, kappa) - 1)))
    xs = np.linspace(-3, 0.5, 36)
    ue = FiniteNContext(n, tau, "complex")
    s = np.array([n ** (2 / 3) * (conditional_overlap(ue, edge + x * n ** (-1 / 6) + 0.5j / math.sqrt(n)) - 1)
                  for x in xs])
    ref = np.array([shifted_conditional_wnh_eginue(x, kappa) for x in xs])
    out["wnh_ue"] = float(np.max(np.abs(s / ref - 1)))
    out["wall"] = time.perf_counter() - t0
    return out


@pytest.mark.parametrize("kind", ENSEMBLES)
def test_c5_snh_density(c5, kind):
    check(5, f"{kind}: SNH edge density within 3%", c5[kind, "rho"] <= 0.03,
          f"max rel {c5[kind, 'rho']:.2%}")


@pytest.mark.parametrize("kind", ENSEMBLES)
def test_c5_snh_overlap(c5, kind):
    check(5, f"{kind}: SNH edge overlap within 5%", c5[kind, "ovl"] <= 0.05,
          f"max rel {c5[kind, 'ovl']:.2%}")


def test_c5_wnh_real(c5):
    check(5, "real WNH conditional overlap within 5%", c5["wnh_oe"] <= 0.05, f"max rel {c5['wnh_oe']:.2%}")


def test_c5_wnh_complex(c5):
    check(5, "complex WNH shifted conditional overlap within 10%", c5["wnh_ue"] <= 0.10,
          f"max rel {c5['wnh_ue']:.2%}")


def test_c5_runtime(c5):
    check(5, "runtime < 5 min", c5["wall"] < 300, f"{c5['wall']:.1f} s")


# 6. WNH non-universality

# Complex edge eigenvalues of the real ensemble arrive at about 0.07 per
# matrix here, so 10^5 of them is out of reach; the run is capped.
C6_REAL_MATRICES = 10_000


@pytest.fixture(scope="module")
def c6():
    t0 = time.perf_counter()
    ue = run_wnh_density(default_config("wnh_density", "complex", alpha=0.5, n=1000, eigenvalues=100_000))
    oe = run_wnh_density(default_config("wnh_density", "real", alpha=0.5, n=1000, eigenvalues=100_000,
                                        max_matrices=C6_REAL_MATRICES, min_retained=100))
    return {"complex": ue, "real": oe, "wall": time.perf_counter() - t0}


@pytest.mark.parametrize("kind", ENSEMBLES)
def test_c6_sample_size(c6, kind):
    ev = c6[kind].summary["eigenvalues"]
    check(6, f"{kind}: 10^5 edge eigenvalues", ev["retained"] >= 100_000,
          f"retained {ev['retained']} from {c6[kind].summary['matrices_sampled']} matrices")


def test_c6_ks(c6):
    res = ks_compare(c6["complex"], c6["real"])
    check(6, "KS distinguishes x-marginals at p < 0.01", res["p_value"] < 0.01,
          f"p = {res['p_value']:.3g}, sizes {res['sizes']}")


def test_c6_real_y_vanishes(c6):
    ratio = c6["real"].summary["statistics"]["first_y_bin_over_peak"]
    check(6, "real y-density first bin below 10% of peak", ratio < 0.1, f"ratio {ratio:.3f}")


def test_c6_runtime(c6):
    check(6, "runtime < 20 min", c6["wall"] < 1200, f"{c6['wall']:.0f} s")


# 7. Determinism

C7_CONFIGS = {
    "snh_density": dict(tau=0.5, n=40, eigenvalues=300, min_retained=50),
    "snh_overlap": dict(tau=0.5, n=40, eigenvalues=300, min_retained=50),
    "wnh_density": dict(alpha=0.5, n=60, eigenvalues=100, min_retained=20),
    "wnh_overlap": dict(alpha=0.5, n=60, eigenvalues=100, min_retained=20),
}


def _outputs(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir()) if p.suffix in (".csv", ".json")}


@pytest.mark.parametrize("experiment", sorted(C7_CONFIGS))
@pytest.mark.parametrize("kind", ENSEMBLES)
def test_c7_byte_identical(tmp_path, experiment, kind):
    cfg = default_config(experiment, kind, **C7_CONFIGS[experiment])
    runs = {}
    for label, workers in (("w1", 1), ("w1_again", 1), ("w2", 2)):
        emit(run_experiment(cfg, workers=workers), tmp_path / label)
        runs[label] = _outputs(tmp_path / label)
    same = runs["w1"] == runs["w1_again"] == runs["w2"]
    check(7, f"{experiment} {kind}: byte-identical across reruns and worker counts", same,
          f"{len(runs['w1'])} files")
