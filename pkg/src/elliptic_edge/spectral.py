"""Eigendecomposition with bi-orthogonal eigenvectors, self-overlaps,
real/complex classification, and the edge coordinate frames."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack
from scipy.sparse.linalg import ArpackNoConvergence, eigs

from .ensembles import EnsembleSpec, SeededStream
from .errors import DecompositionError, DegenerateSpectrumError, DomainError, PairingError

GAP_FLOOR = 1e-10
NEWTON_TOL = 1e-12
NEWTON_MAXITER = 50
SNH_BAND = 0.25


@dataclass
class SpectralSample:
    eigenvalues: np.ndarray
    self_overlaps: np.ndarray
    n: int
    spec: Optional[EnsembleSpec] = None
    stream: Optional[SeededStream] = None
    is_real_eigenvalue: Optional[np.ndarray] = None


def min_gap(w) -> float:
    """Smallest pairwise distance between eigenvalues (inf for fewer than two)."""
    w = np.asarray(w)
    if w.size < 2:
        return math.inf
    d = np.abs(w[:, None] - w[None, :])
    np.fill_diagonal(d, np.inf)
    return float(d.min())


def check_gap(w, x_norm: float) -> None:
    gap = min_gap(w)
    if gap < GAP_FLOOR * x_norm:
        raise DegenerateSpectrumError(
            f"eigenvalue gap {gap:.3e} below {GAP_FLOOR:g} * |X| = {GAP_FLOOR * x_norm:.3e}")


def eigen_biorthogonal(X):
    """Eigenvalues with right vectors (columns of S) and left vectors
    (columns of inv(S)^H), so that VL^H VR = I."""
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError("expected a square matrix")
    try:
        w, vr = np.linalg.eig(X)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"eigendecomposition failed: {exc}") from exc
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(vr))):
        raise DecompositionError("eigendecomposition produced non-finite output")
    check_gap(w, float(np.linalg.norm(X)))
    try:
        s_inv = np.linalg.inv(vr)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"eigenvector matrix is singular: {exc}") from exc
    if not np.all(np.isfinite(s_inv)):
        raise DecompositionError("eigenvector inverse is non-finite")
    return w, vr, s_inv.conj().T


def self_overlaps(left, right) -> np.ndarray:
    """O_nn = |v_L,n|^2 |v_R,n|^2 for bi-orthonormal columns."""
    left = np.asarray(left)
    right = np.asarray(right)
    if left.shape != right.shape or left.ndim != 2:
        raise ValueError("left and right vectors must be matrices of equal shape")
    return np.sum(np.abs(left) ** 2, axis=0) * np.sum(np.abs(right) ** 2, axis=0)


def default_real_tol(n: int) -> float:
    return 1e-9 * math.sqrt(n)


def classify_real(eigenvalues, tol: Optional[float] = None) -> np.ndarray:
    """Flag eigenvalues with |Im z| <= tol as real and check that the rest
    pair up with their conjugates."""
    w = np.asarray(eigenvalues, dtype=complex)
    if tol is None:
        tol = default_real_tol(max(w.size, 1))
    is_real = np.abs(w.imag) <= tol
    upper = np.sort_complex(w[~is_real & (w.imag > 0)])
    lower = np.sort_complex(np.conj(w[~is_real & (w.imag < 0)]))
    if upper.size != lower.size:
        raise PairingError(
            f"{upper.size} eigenvalues above the axis but {lower.size} below at tol={tol:g}")
    if upper.size:
        scale = max(1.0, float(np.max(np.abs(w))))
        if np.max(np.abs(upper - lower)) > 1e-6 * scale:
            raise PairingError("non-real eigenvalues are not closed under conjugation")
    return is_real


def spectral_sample(X, spec=None, stream=None, tol=None) -> SpectralSample:
    w, vr, vl = eigen_biorthogonal(X)
    ov = self_overlaps(vl, vr)
    is_real = None
    if np.isrealobj(X):
        is_real = classify_real(w, tol if tol is not None else default_real_tol(len(w)))
    return SpectralSample(w, ov, len(w), spec, stream, is_real)


# Fast routes: Schur form and Krylov edge eigenpairs.

def complex_schur(X) -> np.ndarray:
    """Upper-triangular complex Schur factor T of X (no Schur vectors)."""
    X = np.asarray(X)
    n = X.shape[0]
    if np.isrealobj(X):
        t, _, _, _, _, _, info = lapack.dgees(lambda wr, wi: 0, X, compute_v=0)
        if info != 0:
            raise DecompositionError(f"real Schur decomposition failed (info={info})")
        t, _ = sla.rsf2csf(t, np.eye(n))
    else:
        t, _, _, _, _, info = lapack.zgees(lambda w: 0, X, compute_v=0)
        if info != 0:
            raise DecompositionError(f"complex Schur decomposition failed (info={info})")
    if not np.all(np.isfinite(t)):
        raise DecompositionError("Schur factor is non-finite")
    return np.triu(t)


def schur_self_overlaps(T, indices) -> np.ndarray:
    """Self-overlaps of selected eigenvalues from the triangular factor T.

    Self-overlaps are unitarily invariant, so the eigenvectors of T serve.
    For diagonal entry k the right vector is (v, 1, 0...) and the left row
    vector (0..., 1, u), each found by one triangular solve.
    """
    T = np.asarray(T, dtype=complex)
    n = T.shape[0]
    out = np.empty(len(indices))
    for j, k in enumerate(indices):
        lam = T[k, k]
        nv = 1.0
        if k > 0:
            a = T[:k, :k] - lam * np.eye(k)
            v = sla.solve_triangular(a, -T[:k, k], lower=False, check_finite=False)
            nv += float(np.vdot(v, v).real)
        nu = 1.0
        if k < n - 1:
            b = T[k + 1:, k + 1:] - lam * np.eye(n - k - 1)
            u = sla.solve_triangular(b, -T[k, k + 1:], trans="T", lower=False, check_finite=False)
            nu += float(np.vdot(u, u).real)
        out[j] = nv * nu
    if not np.all(np.isfinite(out)):
        raise DecompositionError("non-finite self-overlap from Schur factor")
    return out


def arnoldi_edge_eigs(X, threshold: float, v0=None, vectors: bool = False, k0: int = 16):
    """All eigenvalues with |z| > threshold, found by implicitly restarted
    Arnoldi on the largest-modulus end of the spectrum.

    The number of requested eigenvalues grows until the smallest modulus
    returned falls below ``threshold``, which certifies that nothing above it
    was missed. With ``vectors`` the self-overlaps come from a second
    decomposition of X^H, matching eigenvalues to conjugates.
    Returns (eigenvalues, self_overlaps or None).
    """
    X = np.asarray(X)
    n = X.shape[0]
    k = min(k0, n - 2)
    while True:
        try:
            res = eigs(X, k=k, which="LM", v0=v0, tol=1e-13, return_eigenvectors=vectors,
                       maxiter=5000)
        except ArpackNoConvergence as exc:
            raise DecompositionError(f"Arnoldi iteration did not converge: {exc}") from exc
        w = res[0] if vectors else res
        w = np.asarray(w, dtype=complex)
        mods = np.abs(w)
        if not np.all(np.isfinite(w)):
            raise DecompositionError("Arnoldi returned non-finite eigenvalues")
        if mods.min() < threshold or k >= n - 2:
            break
        k = min(2 * k, n - 2)
    if k >= n - 2 and mods.min() >= threshold:
        # fall back to the dense solver when the Krylov space is exhausted
        if vectors:
            wd, vr, vl = eigen_biorthogonal(X)
            keep = np.abs(wd) > threshold
            return wd[keep], self_overlaps(vl, vr)[keep]
        wd = np.linalg.eigvals(X)
        return wd[np.abs(wd) > threshold], None
    keep = mods > threshold
    w_keep = w[keep]
    check_gap(w, float(np.linalg.norm(X)))
    if not vectors:
        return w_keep, None
    vr = res[1][:, keep]
    try:
        res_l = eigs(X.conj().T, k=k, which="LM", v0=None if v0 is None else np.conj(v0),
                     tol=1e-13, maxiter=5000)
    except ArpackNoConvergence as exc:
        raise DecompositionError(f"Arnoldi iteration on X^H did not converge: {exc}") from exc
    wl = np.conj(res_l[0])
    vl_all = res_l[1]
    ov = np.empty(w_keep.size)
    for j, lam in enumerate(w_keep):
        i = int(np.argmin(np.abs(wl - lam)))
        if abs(wl[i] - lam) > 1e-8 * max(1.0, abs(lam)):
            raise DecompositionError("left and right Arnoldi spectra disagree")
        y = vl_all[:, i]
        x = vr[:, j]
        ov[j] = float(np.vdot(y, y).real * np.vdot(x, x).real / abs(np.vdot(y, x)) ** 2)
    return w_keep, ov


# Strong non-Hermiticity edge frame.

@dataclass(frozen=True)
class SnhEdgeFrame:
    """Boundary ellipse with semi-axes sqrt(n)(1 + tau) and sqrt(n)(1 - tau)."""

    n: int
    tau: float
    a: float = field(init=False)
    b: float = field(init=False)

    def __post_init__(self):
        if not (0.0 <= self.tau < 1.0):
            raise DomainError(f"tau must lie in [0, 1), got {self.tau!r}")
        root = math.sqrt(self.n)
        object.__setattr__(self, "a", root * (1.0 + self.tau))
        object.__setattr__(self, "b", root * (1.0 - self.tau))

    def boundary_point(self, theta):
        return self.a * np.cos(theta) + 1j * self.b * np.sin(theta)

    def normal(self, theta):
        """Outward unit normal as a complex number."""
        c, s = np.cos(theta), np.sin(theta)
        vec = (1.0 - self.tau) * c + 1j * (1.0 + self.tau) * s
        return vec / np.sqrt(1.0 + self.tau ** 2 - 2.0 * self.tau * np.cos(2.0 * theta))

    def curvature_radius(self, theta):
        c, s = np.cos(theta), np.sin(theta)
        return (self.a ** 2 * s ** 2 + self.b ** 2 * c ** 2) ** 1.5 / (self.a * self.b)

    def reconstruct(self, eta, theta):
        return self.boundary_point(theta) + eta * self.normal(theta)

    def elliptic_radius(self, z):
        z = np.asarray(z, dtype=complex)
        return np.sqrt((z.real / self.a) ** 2 + (z.imag / self.b) ** 2)

    def distance_bound(self, z):
        """Lower bound on the distance from z to the boundary, from the gap
        between the boundary and the concentric scaled ellipse through z."""
        return np.abs(self.elliptic_radius(z) - 1.0) * self.b

    def project(self, z):
        """Vectorized nearest-point projection.

        Returns (eta, theta, ok) where ``ok`` marks points inside the band
        |eta| <= 0.25 sqrt(n) whose nearest boundary point is unique.
        """
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if z.size == 0:
            empty = np.zeros(0)
            return empty, empty.copy(), np.zeros(0, dtype=bool)
        theta = np.arctan2(z.imag / self.b, z.real / self.a)
        for _ in range(NEWTON_MAXITER):
            z0 = self.boundary_point(theta)
            dz0 = -self.a * np.sin(theta) + 1j * self.b * np.cos(theta)
            diff = z - z0
            f = (diff * np.conj(dz0)).real
            fp = -np.abs(dz0) ** 2 - (diff * np.conj(z0)).real
            fp = np.where(fp < 0.0, fp, -np.abs(dz0) ** 2)
            step = np.clip(f / fp, -0.5, 0.5)
            theta = theta - step
            if np.all(np.abs(step) <= NEWTON_TOL):
                break
        theta = np.mod(theta, 2.0 * np.pi)
        z0 = self.boundary_point(theta)
        nrm = self.normal(theta)
        eta = ((z - z0) * np.conj(nrm)).real
        resid = np.abs(self.reconstruct(eta, theta) - z)
        ok = (np.abs(eta) <= SNH_BAND * math.sqrt(self.n)) & (resid <= 1e-9 * math.sqrt(self.n))
        # inside points must sit closer than the local radius of curvature and
        # no other boundary point may be nearer
        inner = ok & (eta < 0.0)
        if inner.any():
            ok[inner] &= -eta[inner] < self.curvature_radius(theta[inner])
            idx = np.nonzero(ok & (eta < 0.0))[0]
            if idx.size:
                grid = np.linspace(0.0, 2.0 * np.pi, 721)[:-1]
                pts = self.boundary_point(grid)
                dmin = np.abs(z[idx, None] - pts[None, :]).min(axis=1)
                ok[idx] &= dmin >= -eta[idx] * (1.0 - 1e-9)
        return eta, theta, ok


def snh_edge_project(z: complex, n: int, tau: float):
    """(eta, theta) with z = z0(theta) + eta * nhat(theta)."""
    eta, theta, ok = SnhEdgeFrame(n, tau).project([z])
    if not ok[0]:
        raise DomainError(
            f"point {z!r} is outside the projection band or too deep inside the ellipse")
    return float(eta[0]), float(theta[0])


# Weak non-Hermiticity edge chart.

@dataclass(frozen=True)
class WnhFrame:
    """Affine chart x = (Re z - 2 sqrt(n)) n^(1/6), y = Im z sqrt(n) at the
    right edge; the left edge uses the mirror image z -> -conj(z)."""

    n: int

    def coords(self, z, edge: str = "right"):
        z = np.asarray(z, dtype=complex)
        re = z.real if edge == "right" else -z.real
        if edge not in ("right", "left"):
            raise ValueError("edge must be 'right' or 'left'")
        x = (re - 2.0 * math.sqrt(self.n)) * self.n ** (1.0 / 6.0)
        y = z.imag * math.sqrt(self.n)
        return x, y

    def point(self, x, y, edge: str = "right"):
        re = 2.0 * math.sqrt(self.n) + np.asarray(x) * self.n ** (-1.0 / 6.0)
        if edge == "left":
            re = -re
        return re + 1j * np.asarray(y) * self.n ** (-0.5)


def wnh_edge_coords(z: complex, n: int, edge: str = "right"):
    x, y = WnhFrame(n).coords(z, edge)
    if np.ndim(x) == 0:
        return float(x), float(y)
    return x, y
