from __future__ import annotations

from functools import reduce

import numpy as np
import pytest

from avqe.ansatz import Ansatz
from avqe.pauli import PauliSum

_MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def kron_matrix(letters: str) -> np.ndarray:
    """Independent Kronecker-product oracle, qubit 0 leftmost."""
    return reduce(np.kron, [_MATS[c] for c in letters])


def kron_sum(h: PauliSum) -> np.ndarray:
    out = np.zeros((h.dim, h.dim), dtype=complex)
    for t in h.terms:
        out += t.coefficient * kron_matrix(t.letters)
    return out


def random_letters(rng: np.random.Generator, n: int, allow_identity: bool = False) -> str:
    while True:
        s = "".join(rng.choice(list("IXYZ"), size=n))
        if allow_identity or set(s) != {"I"}:
            return s


def random_sum(rng: np.random.Generator, n: int, n_terms: int = 4) -> PauliSum:
    return PauliSum(n, [(float(rng.normal()), random_letters(rng, n)) for _ in range(n_terms)])


def random_ansatz(rng: np.random.Generator, n: int, m: int) -> Ansatz:
    return Ansatz(tuple(random_letters(rng, n) for _ in range(m)), n)


def random_state(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def dense_state(ansatz: Ansatz, theta) -> np.ndarray:
    """Prepare by explicit matrix exponentials, independent of the library sweep."""
    psi = np.zeros(1 << ansatz.n_qubits, dtype=complex)
    psi[0] = 1.0
    for letters, t in zip(ansatz.generators, theta):
        p = kron_matrix(letters)
        psi = (np.cos(t) * np.eye(len(psi)) - 1j * np.sin(t) * p) @ psi
    return psi


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
