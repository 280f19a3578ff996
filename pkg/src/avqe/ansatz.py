"""Pauli-rotation ansatz: state preparation and analytic derivatives.

The circuit is ``U_{M-1} ... U_0 |0...0>`` with ``U_j = exp(-i theta_j P_j)``.
All derivatives are expressed through the Heisenberg conjugates
``P~_k = V_k P_k V_k^dagger`` where ``V_k`` collects the layers after k;
``d psi / d theta_k = -i P~_k psi``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapExceeded, DimensionMismatch, LengthMismatch
from .pauli import PauliSum, apply_pauli, check_dense, pauli_action, validate_letters

HESSIAN_CAP = 32
THIRD_TENSOR_CAP = 12
GAMMA_FLOOR = 1e-10


@dataclass(frozen=True)
class Ansatz:
    generators: tuple[str, ...]
    n_qubits: int

    def __post_init__(self):
        gens = tuple(validate_letters(g, self.n_qubits) for g in self.generators)
        if not gens:
            raise ValueError("an ansatz needs at least one generator")
        object.__setattr__(self, "generators", gens)

    @classmethod
    def from_generators(cls, generators: Sequence[str]) -> "Ansatz":
        generators = tuple(generators)
        if not generators:
            raise ValueError("an ansatz needs at least one generator")
        return cls(generators, len(generators[0]))

    @property
    def n_params(self) -> int:
        return len(self.generators)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits


def _theta(ansatz: Ansatz, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != ansatz.n_params:
        raise LengthMismatch(f"expected {ansatz.n_params} angles, got {theta.shape[0]}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("angles must be finite")
    return theta


def _rotate(letters: str, angle: float, states: np.ndarray) -> np.ndarray:
    src, phase = pauli_action(letters)
    return np.cos(angle) * states - 1j * np.sin(angle) * (phase * states[..., src])


def _check_dim(psi: np.ndarray, op: PauliSum) -> None:
    if psi.shape[-1] != op.dim:
        raise DimensionMismatch(f"state of length {psi.shape[-1]} vs operator on {op.n_qubits} qubits")


def zero_state(n_qubits: int) -> np.ndarray:
    psi = np.zeros(1 << n_qubits, dtype=complex)
    psi[0] = 1.0
    return psi


def prepare(ansatz: Ansatz, theta) -> np.ndarray:
    check_dense(ansatz.n_qubits)
    theta = _theta(ansatz, theta)
    psi = zero_state(ansatz.n_qubits)
    for letters, angle in zip(ansatz.generators, theta):
        psi = _rotate(letters, angle, psi)
        psi /= np.linalg.norm(psi)
    return psi


def prepare_batch(ansatz: Ansatz, thetas: np.ndarray) -> np.ndarray:
    """Prepare one state per row of ``thetas`` (shape (S, M)); returns (S, d)."""
    check_dense(ansatz.n_qubits)
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    if thetas.shape[1] != ansatz.n_params:
        raise LengthMismatch(f"expected {ansatz.n_params} angles per row, got {thetas.shape[1]}")
    psi = np.zeros((thetas.shape[0], ansatz.dim), dtype=complex)
    psi[:, 0] = 1.0
    for j, letters in enumerate(ansatz.generators):
        src, phase = pauli_action(letters)
        c = np.cos(thetas[:, j])[:, None]
        s = np.sin(thetas[:, j])[:, None]
        psi = c * psi - 1j * s * (phase * psi[:, src])
    return psi / np.linalg.norm(psi, axis=1, keepdims=True)


@dataclass(frozen=True)
class EnergySigma:
    energy: float
    sigma: float


def energy_and_sigma(psi: np.ndarray, op: PauliSum) -> EnergySigma:
    _check_dim(psi, op)
    a_psi = op.apply(psi)
    e = float(np.vdot(psi, a_psi).real)
    # ||(A - E) psi|| avoids the cancellation in sqrt(<A^2> - E^2) near eigenstates
    return EnergySigma(e, float(np.linalg.norm(a_psi - e * psi)))


def energy(ansatz: Ansatz, theta, h: PauliSum) -> float:
    psi = prepare(ansatz, theta)
    return float(np.vdot(psi, h.apply(psi)).real)


def tangent_vectors(ansatz: Ansatz, theta) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(psi, V)`` with ``V[k] = P~_k psi``, so ``d_k psi = -i V[k]``."""
    check_dense(ansatz.n_qubits)
    theta = _theta(ansatz, theta)
    m = ansatz.n_params
    stack = np.zeros((m + 1, ansatz.dim), dtype=complex)
    stack[m] = zero_state(ansatz.n_qubits)  # last row carries the state itself
    for j, (letters, angle) in enumerate(zip(ansatz.generators, theta)):
        stack[j] = apply_pauli(letters, stack[m])
        stack[: j + 1] = _rotate(letters, angle, stack[: j + 1])
        stack[m] = _rotate(letters, angle, stack[m])
    return stack[m], stack[:m]


def energy_and_gradient(ansatz: Ansatz, theta, h: PauliSum) -> tuple[float, np.ndarray]:
    """Energy and gradient by one forward and one backward (adjoint) sweep."""
    psi = prepare(ansatz, theta)
    theta = _theta(ansatz, theta)
    lam = h.apply(psi)
    e = float(np.vdot(psi, lam).real)
    grad = np.empty(ansatz.n_params)
    phi = psi
    for k in range(ansatz.n_params - 1, -1, -1):
        letters = ansatz.generators[k]
        grad[k] = 2.0 * np.vdot(lam, apply_pauli(letters, phi)).imag
        phi = _rotate(letters, -theta[k], phi)
        lam = _rotate(letters, -theta[k], lam)
    return e, grad


def gradient(ansatz: Ansatz, theta, h: PauliSum) -> np.ndarray:
    return energy_and_gradient(ansatz, theta, h)[1]


def _heisenberg_h_stack(ansatz: Ansatz, theta: np.ndarray, h_psi: np.ndarray) -> np.ndarray:
    """``W[l] = P~_l H psi`` via a backward sweep then forward re-stacking."""
    m = ansatz.n_params
    chi = np.empty((m, ansatz.dim), dtype=complex)
    cur = h_psi
    for l in range(m - 1, -1, -1):
        chi[l] = cur  # V_l^dagger H psi
        cur = _rotate(ansatz.generators[l], -theta[l], cur)
    w = np.empty_like(chi)
    for j, letters in enumerate(ansatz.generators):
        if j:
            w[:j] = _rotate(letters, theta[j], w[:j])
        w[j] = apply_pauli(letters, chi[j])
    return w


def hessian(ansatz: Ansatz, theta, h: PauliSum, cap: int = HESSIAN_CAP) -> np.ndarray:
    if ansatz.n_params > cap:
        raise CapExceeded(f"Hessian requested for M={ansatz.n_params} > cap {cap}")
    theta = _theta(ansatz, theta)
    psi, v = tangent_vectors(ansatz, theta)
    h_psi = h.apply(psi)
    hv = h.apply(v)
    a = v.conj() @ hv.T  # <v_k|H|v_l>
    w = _heisenberg_h_stack(ansatz, theta, h_psi)
    c = w.conj() @ v.T  # c[l, k] = <H psi| P~_l P~_k psi>
    b = np.tril(c) + np.tril(c, -1).T
    out = 2.0 * (a - b).real
    return 0.5 * (out + out.T)


def conjugated_generators(ansatz: Ansatz, theta) -> np.ndarray:
    """Dense Heisenberg conjugates, shape (M, d, d)."""
    theta = _theta(ansatz, theta)
    d = ansatz.dim
    m = ansatz.n_params
    eye = np.eye(d, dtype=complex)
    out = np.empty((m, d, d), dtype=complex)
    suffix = eye.copy()  # V_k, built from the outermost layer inwards
    for k in range(m - 1, -1, -1):
        p = apply_pauli(ansatz.generators[k], eye.T).T  # dense P_k
        out[k] = suffix @ p @ suffix.conj().T
        suffix = suffix @ _rotate(ansatz.generators[k], theta[k], eye.T).T
    return out


def third_tensor(ansatz: Ansatz, theta, h: PauliSum, cap: int = THIRD_TENSOR_CAP) -> np.ndarray:
    m = ansatz.n_params
    if m > cap:
        raise CapExceeded(f"third-derivative tensor requested for M={m} > cap {cap}")
    theta = _theta(ansatz, theta)
    psi = prepare(ansatz, theta)
    pt = conjugated_generators(ansatz, theta)
    v1 = pt @ psi  # (m, d)
    v2_full = np.einsum("aij,bj->abi", pt, v1)  # P~_a P~_b psi
    v3_full = np.einsum("aij,bcj->abci", pt, v2_full)

    idx = np.indices((m, m))
    hi, lo = np.maximum(idx[0], idx[1]), np.minimum(idx[0], idx[1])
    v2 = v2_full[hi, lo]  # ordered product, later generator on the left

    trip = np.sort(np.indices((m, m, m)).reshape(3, -1), axis=0)[::-1]
    v3 = v3_full[trip[0], trip[1], trip[2]].reshape(m, m, m, -1)

    h_psi = h.apply(psi)
    hv1 = h.apply(v1)
    first = -2.0 * np.einsum("i,mkli->mkl", h_psi.conj(), v3).imag
    x = np.einsum("mi,kli->mkl", hv1.conj(), v2).imag
    second = 2.0 * (x + x.transpose(1, 0, 2) + x.transpose(1, 2, 0))
    return first + second


@dataclass(frozen=True)
class Metric:
    g: np.ndarray
    gamma: float  # smallest eigenvalue of g

    @property
    def gamma_floored(self) -> float:
        return max(self.gamma, GAMMA_FLOOR)


def geometric_tensor(ansatz: Ansatz, theta) -> Metric:
    psi, v = tangent_vectors(ansatz, theta)
    overlaps = v.conj() @ psi  # <v_mu|psi>
    g = (v.conj() @ v.T - np.outer(overlaps, overlaps.conj())).real
    g = 0.5 * (g + g.T)
    return Metric(g=g, gamma=float(np.linalg.eigvalsh(g)[0]))
