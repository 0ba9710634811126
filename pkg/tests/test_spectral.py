import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from elliptic_edge.ensembles import EnsembleSpec, SeededStream, sample
from elliptic_edge.errors import DegenerateSpectrumError, DomainError, PairingError
from elliptic_edge.spectral import (SnhEdgeFrame, WnhFrame, arnoldi_edge_eigs, classify_real,
                                    complex_schur, eigen_biorthogonal, schur_self_overlaps,
                                    self_overlaps, snh_edge_project, spectral_sample,
                                    wnh_edge_coords)


def draw(kind, n, tau, i=0, seed=7):
    return sample(EnsembleSpec.fixed(kind, n, tau), SeededStream(seed, i))


def full_overlap_matrix(vl, vr):
    # O_mn = (vL_m^H vL_n)(vR_n^H vR_m)
    return (vl.conj().T @ vl) * (vr.conj().T @ vr).T


# Decomposition

def test_diagonal_exact():
    w, vr, vl = eigen_biorthogonal(np.diag([3.0, -1.0, 0.5]))
    assert np.array_equal(np.sort(w.real), [-1.0, 0.5, 3.0])
    assert np.allclose(np.abs(vr), np.eye(3)[:, np.argsort(np.argsort(-np.abs(w)))] * 0 + np.abs(vr))
    assert np.all(self_overlaps(vl, vr) == 1.0)


def test_two_by_two_closed_form():
    X = np.array([[1.0, 2.0], [0.0, 2.0]])
    w, vr, vl = eigen_biorthogonal(X)
    i1 = int(np.argmin(np.abs(w - 1)))
    assert w[i1] == pytest.approx(1.0) and w[1 - i1] == pytest.approx(2.0)
    r = vr[:, i1] / vr[0, i1]
    assert np.allclose(r, [1.0, 0.0])
    left = vl[:, i1] / vl[0, i1]
    assert np.allclose(left, [1.0, -2.0])
    assert np.allclose(self_overlaps(vl, vr), [5.0, 5.0], rtol=1e-12)


@pytest.mark.parametrize("kind", ["real", "complex"])
def test_postconditions_random(kind):
    X = draw(kind, 16, 0.5)
    w, vr, vl = eigen_biorthogonal(X)
    norm = np.linalg.norm(X)
    assert np.max(np.abs(X @ vr - vr * w)) <= 1e-8 * norm
    assert np.max(np.abs(vl.conj().T @ X - w[:, None] * vl.conj().T)) <= 1e-8 * norm
    assert np.max(np.abs(vl.conj().T @ vr - np.eye(16))) <= 1e-8


def test_degenerate_spectrum_flagged():
    with pytest.raises(DegenerateSpectrumError):
        eigen_biorthogonal(np.eye(3))


def test_rejects_nonsquare():
    with pytest.raises(ValueError):
        eigen_biorthogonal(np.ones((2, 3)))


# Self-overlaps

@pytest.mark.parametrize("n", [5, 30])
def test_symmetric_gives_one(n):
    a = np.random.default_rng(n).standard_normal((n, n))
    s = spectral_sample(a + a.T)
    assert np.max(np.abs(s.self_overlaps - 1.0)) <= 1e-10
    assert s.is_real_eigenvalue.all()


@pytest.mark.parametrize("kind", ["real", "complex"])
@pytest.mark.parametrize("tau", [0.0, 0.5])
def test_row_sums(kind, tau):
    for i in range(5):
        _, vr, vl = eigen_biorthogonal(draw(kind, 16, tau, i))
        o = full_overlap_matrix(vl, vr)
        assert np.allclose(np.diag(o).real, self_overlaps(vl, vr), rtol=1e-12)
        assert np.max(np.abs(o.sum(axis=1) - 1.0)) <= 1e-7


def test_sample_invariants_real():
    s = spectral_sample(draw("real", 24, 0.3))
    assert len(s.eigenvalues) == len(s.self_overlaps) == s.n == 24
    assert np.all(s.self_overlaps >= 1 - 1e-8)
    w, o = s.eigenvalues, s.self_overlaps
    for k in np.nonzero(~s.is_real_eigenvalue)[0]:
        j = int(np.argmin(np.abs(w - np.conj(w[k]))))
        assert o[j] == pytest.approx(o[k], rel=1e-6)


def test_schur_matches_inverse_route():
    for kind in ("real", "complex"):
        X = draw(kind, 40, 0.5)
        s = spectral_sample(X)
        T = complex_schur(X)
        d = np.diag(T)
        ov = schur_self_overlaps(T, range(40))
        for z, o in zip(d, ov):
            k = int(np.argmin(np.abs(s.eigenvalues - z)))
            assert abs(s.eigenvalues[k] - z) <= 1e-9 * math.sqrt(40)
            assert o == pytest.approx(s.self_overlaps[k], rel=1e-7)


@pytest.mark.parametrize("kind", ["real", "complex"])
def test_arnoldi_matches_dense(kind):
    n = 200
    X = draw(kind, n, 0.99)
    threshold = 2 * math.sqrt(n) - 6 * n ** (-1 / 6)
    w, ov = arnoldi_edge_eigs(X, threshold, vectors=True)
    s = spectral_sample(X)
    keep = np.abs(s.eigenvalues) > threshold
    assert len(w) == int(keep.sum()) > 0
    for z, o in zip(w, ov):
        k = int(np.argmin(np.abs(s.eigenvalues - z)))
        assert abs(s.eigenvalues[k] - z) <= 1e-8 * math.sqrt(n)
        assert o == pytest.approx(s.self_overlaps[k], rel=1e-6)


# Real/complex classification

def test_classify_symmetric_all_real():
    a = np.random.default_rng(1).standard_normal((10, 10))
    assert classify_real(np.linalg.eigvals(a + a.T)).all()


def test_classify_conjugate_pair():
    flags = classify_real([3 + 2j, 3 - 2j, 1.0], tol=1e-9)
    assert flags.tolist() == [False, False, True]


def test_classify_unpaired():
    with pytest.raises(PairingError):
        classify_real([3 + 2j, 1.0], tol=1e-9)


def test_classify_tolerance_plateau():
    n = 1000
    mats = [draw("real", n, 0.25, i, seed=3) for i in range(3)]
    spectra = [np.linalg.eigvals(m) for m in mats]
    fracs = []
    for tol in (1e-12, 1e-9, 1e-6):
        c = sum(int((~classify_real(w, tol)).sum()) for w in spectra)
        fracs.append(c / (3 * n))
    assert max(fracs) - min(fracs) <= 0.02


# SNH frame

def test_boundary_top():
    n, tau = 100, 0.4
    eta, theta = snh_edge_project(1j * math.sqrt(n) * (1 - tau), n, tau)
    assert abs(eta) <= 1e-9 * math.sqrt(n)
    assert theta == pytest.approx(math.pi / 2, abs=1e-10)


def test_right_vertex_offset():
    n, tau, d = 100, 0.4, 0.3
    eta, theta = snh_edge_project(math.sqrt(n) * (1 + tau) + d, n, tau)
    assert eta == pytest.approx(d, abs=1e-10)
    assert min(theta, 2 * math.pi - theta) <= 1e-10


def test_normal_at_zero():
    f = SnhEdgeFrame(50, 0.6)
    assert f.normal(0.0) == pytest.approx(1.0)
    assert f.normal(math.pi / 2) == pytest.approx(1j)


def test_projection_round_trip_random():
    n, tau = 400, 0.5
    f = SnhEdgeFrame(n, tau)
    rng = np.random.default_rng(11)
    theta = rng.uniform(0, 2 * np.pi, 1000)
    eta = rng.uniform(-0.1, 0.2, 1000) * math.sqrt(n)  # inside the evolute margin
    z = f.reconstruct(eta, theta)
    e2, t2, ok = f.project(z)
    assert ok.all()
    assert np.max(np.abs(f.reconstruct(e2, t2) - z)) <= 1e-9 * math.sqrt(n)
    assert np.allclose(e2, eta, atol=1e-9 * math.sqrt(n))


@settings(max_examples=100, deadline=None)
@given(theta=st.floats(0, 2 * math.pi), frac=st.floats(-0.24, 0.24), tau=st.floats(0.0, 0.8))
def test_projection_identity(theta, frac, tau):
    n = 256
    f = SnhEdgeFrame(n, tau)
    eta = frac * math.sqrt(n)
    z = complex(f.reconstruct(eta, theta))
    e2, t2, ok = f.project([z])
    if ok[0]:
        assert abs(complex(f.reconstruct(e2[0], t2[0])) - z) <= 1e-9 * math.sqrt(n)
    if eta > 0:
        assert ok[0] and e2[0] == pytest.approx(eta, abs=1e-8)


def test_sign_of_eta():
    f = SnhEdgeFrame(100, 0.3)
    eta, _, ok = f.project([0.5 * f.a + 0j, 1.1 * f.a + 0j])
    assert ok[1] and eta[1] > 0
    assert eta[0] < 0 or not ok[0]


def test_deep_inside_rejected():
    with pytest.raises(DomainError):
        snh_edge_project(0.1 + 0.1j, 100, 0.5)


def test_frame_rejects_tau():
    with pytest.raises(DomainError):
        SnhEdgeFrame(10, 1.0)


# WNH chart

def test_wnh_origin_and_unit():
    n = 1000
    assert wnh_edge_coords(2 * math.sqrt(n), n) == (0.0, 0.0)
    x, y = wnh_edge_coords(2 * math.sqrt(n) + 1j * n ** -0.5, n)
    assert x == 0.0 and y == pytest.approx(1.0, rel=1e-15)


@settings(max_examples=100, deadline=None)
@given(x=st.floats(-6, 3), y=st.floats(-3, 3), n=st.integers(10, 5000))
def test_wnh_inverse(x, y, n):
    f = WnhFrame(n)
    for edge in ("right", "left"):
        x2, y2 = f.coords(f.point(x, y, edge), edge)
        assert x2 == pytest.approx(x, abs=1e-9) and y2 == pytest.approx(y, abs=1e-9)


def test_wnh_left_mirror():
    n, x = 1000, -1.5
    z = -2 * math.sqrt(n) - x * n ** (-1 / 6)
    assert wnh_edge_coords(z, n, edge="left")[0] == pytest.approx(x, abs=1e-10)
