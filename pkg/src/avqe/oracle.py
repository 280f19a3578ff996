"""Exact-diagonalization ground truth: spectra, gaps, fidelities, branch indices."""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DegeneratePath, DimensionMismatch, NumericalFailure
from .pauli import AdiabaticPath, PauliSum, check_dense, interpolate

DEGENERACY_TOL = 1e-10
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # column j pairs with eigenvalues[j]

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def ground_state(self) -> np.ndarray:
        return self.eigenvectors[:, 0]

    @property
    def gap(self) -> float:
        return float(self.eigenvalues[1] - self.eigenvalues[0]) if self.dim > 1 else np.inf

    def projector(self, j: int) -> np.ndarray:
        """Projector onto the eigenspace of level j (the whole degenerate cluster)."""
        cluster = np.abs(self.eigenvalues - self.eigenvalues[j]) <= DEGENERACY_TOL * self._scale
        v = self.eigenvectors[:, cluster]
        return v @ v.conj().T

    @property
    def _scale(self) -> float:
        return max(1.0, float(np.max(np.abs(self.eigenvalues))))

    def gap_to(self, j: int) -> float:
        """Distance from level j to the nearest distinct eigenvalue."""
        diffs = np.abs(self.eigenvalues - self.eigenvalues[j])
        distinct = diffs[diffs > DEGENERACY_TOL * self._scale]
        return float(distinct.min()) if distinct.size else np.inf


def _fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate so the first amplitude of maximal magnitude is real and positive."""
    mags = np.abs(v)
    k = int(np.argmax(mags > mags.max() * (1 - 1e-9)))
    return v * (np.conj(v[k]) / mags[k])


def _canonical_cluster(vecs: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of span(vecs), independent of the solver's choice."""
    k = vecs.shape[1]
    proj = vecs @ vecs.conj().T
    basis: list[np.ndarray] = []
    for i in range(proj.shape[0]):
        cand = proj[:, i].copy()
        for b in basis:
            cand -= b * np.vdot(b, cand)
        norm = np.linalg.norm(cand)
        if norm > 1e-6:
            basis.append(_fix_phase(cand / norm))
            if len(basis) == k:
                break

    def key(b: np.ndarray):
        nz = np.flatnonzero(np.abs(b) > 1e-12)
        first = b[nz[0]]
        return (-round(abs(first), 12), tuple(np.sign(np.round(b.real, 12))))

    basis.sort(key=key)
    return np.stack(basis, axis=1)


def eigensystem(h: PauliSum | np.ndarray) -> SpectralData:
    if isinstance(h, PauliSum):
        check_dense(h.n_qubits)
        m = h.matrix
    else:
        m = np.asarray(h)
    w, v = np.linalg.eigh(m)
    scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
    out = np.empty_like(v)
    i = 0
    while i < len(w):
        j = i + 1
        while j < len(w) and w[j] - w[i] <= DEGENERACY_TOL * scale:
            j += 1
        if j - i == 1:
            out[:, i] = _fix_phase(v[:, i])
        else:
            out[:, i:j] = _canonical_cluster(v[:, i:j])
        i = j
    h_norm = float(np.max(np.abs(w))) if w.size else 0.0
    resid = np.linalg.norm(m @ out - out * w, axis=0)
    if resid.size and resid.max() > RESIDUAL_TOL * max(h_norm, 1e-300):
        raise NumericalFailure(f"eigen-residual {resid.max():.3e} exceeds tolerance")
    return SpectralData(eigenvalues=w, eigenvectors=out)


@dataclass(frozen=True)
class GapProfile:
    lambdas: np.ndarray
    gaps: np.ndarray
    delta_min: float
    argmin: float


def _gap_from_matrix(m: np.ndarray) -> float:
    w = np.linalg.eigvalsh(m)
    return float(w[1] - w[0])


def gap_at(path: AdiabaticPath, lam: float) -> float:
    return _gap_from_matrix(interpolate(path, lam).matrix)


def gap_profile(path: AdiabaticPath, grid: int = 1001) -> GapProfile:
    if grid < 2:
        raise ValueError("grid must have at least two points")
    check_dense(path.n_qubits)
    mi, mf = path.h_initial.matrix, path.h_final.matrix

    def gap(lam: float) -> float:
        return _gap_from_matrix((1.0 - lam) * mi + lam * mf)

    lams = np.linspace(0.0, 1.0, int(grid))
    gaps = np.array([gap(x) for x in lams])
    k = int(np.argmin(gaps))
    best_x, best = float(lams[k]), float(gaps[k])
    lo, hi = lams[max(k - 1, 0)], lams[min(k + 1, grid - 1)]
    res = minimize_scalar(gap, bounds=(lo, hi), method="bounded", options={"xatol": 1e-9})
    if res.fun < best:
        best_x, best = float(res.x), float(res.fun)
    if best < 1e-10:
        raise DegeneratePath(f"gap closes to {best:.3e} at lambda={best_x:.6f}")
    return GapProfile(lambdas=lams, gaps=gaps, delta_min=best, argmin=best_x)


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise DimensionMismatch(f"state shapes {a.shape} and {b.shape} differ")
    return float(min(1.0, abs(np.vdot(b, a)) ** 2))


@dataclass(frozen=True)
class BranchInfo:
    index: int
    unique: bool
    distance: float
    energy: float
    sigma: float


def branch_index(spec: SpectralData, psi: np.ndarray) -> BranchInfo:
    """Nearest eigenvalue to the state's energy, with the uniqueness test of the
    standard-deviation criterion (sigma below half the gap to that level)."""
    if psi.shape[-1] != spec.dim:
        raise DimensionMismatch("state and spectrum dimensions differ")
    weights = np.abs(spec.eigenvectors.conj().T @ psi) ** 2
    weights /= weights.sum()
    e = float(weights @ spec.eigenvalues)
    var = float(weights @ spec.eigenvalues**2) - e * e
    sigma = float(np.sqrt(max(0.0, var)))
    dist = np.abs(spec.eigenvalues - e)
    j = int(np.argmin(dist))  # argmin takes the lowest index on ties
    return BranchInfo(index=j, unique=sigma < spec.gap_to(j) / 2, distance=float(dist[j]),
                      energy=e, sigma=sigma)


class PathOracle:
    """Memoized spectra along one path; safe for concurrent readers."""

    def __init__(self, path: AdiabaticPath):
        self.path = path
        self._cache: dict[float, SpectralData] = {}
        self._lock = threading.Lock()

    def spectrum(self, lam: float) -> SpectralData:
        lam = float(lam)
        with self._lock:
            hit = self._cache.get(lam)
        if hit is not None:
            return hit
        spec = eigensystem(interpolate(self.path, lam))
        with self._lock:
            self._cache[lam] = spec
        return spec

    def ground_state(self, lam: float) -> np.ndarray:
        return self.spectrum(lam).ground_state

    def ground_energy(self, lam: float) -> float:
        return self.spectrum(lam).ground_energy

    def gap(self, lam: float) -> float:
        return self.spectrum(lam).gap
