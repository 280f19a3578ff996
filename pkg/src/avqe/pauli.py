"""Pauli-string Hamiltonians, dense matrices and the linear adiabatic path."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Mapping

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DenseCapExceeded, H2TermBlowup, LambdaOutOfRange

PAULI_LETTERS = "IXYZ"
ZERO_TOL = 1e-14
DEFAULT_DENSE_CAP = 12
# above this size H|psi> is applied term by term instead of through a dense matrix
DENSE_APPLY_LIMIT = 10

PAULI_MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# single-letter products a*b = phase * c
_PRODUCT = {
    ("X", "Y"): (1j, "Z"), ("Y", "X"): (-1j, "Z"),
    ("Y", "Z"): (1j, "X"), ("Z", "Y"): (-1j, "X"),
    ("Z", "X"): (1j, "Y"), ("X", "Z"): (-1j, "Y"),
}


def dense_cap() -> int:
    """Largest qubit count for dense work; ``AVQE_DENSE_CAP`` overrides it."""
    raw = os.environ.get("AVQE_DENSE_CAP")
    return int(raw) if raw else DEFAULT_DENSE_CAP


def check_dense(n_qubits: int) -> None:
    cap = dense_cap()
    if n_qubits > cap:
        raise DenseCapExceeded(f"{n_qubits} qubits exceeds the dense cap of {cap}")


def validate_letters(letters: str, n_qubits: int | None = None) -> str:
    letters = str(letters).upper()
    if not letters or any(c not in PAULI_LETTERS for c in letters):
        raise ValueError(f"invalid Pauli string {letters!r}")
    if n_qubits is not None and len(letters) != n_qubits:
        raise ValueError(f"Pauli string {letters!r} does not act on {n_qubits} qubits")
    return letters


@lru_cache(maxsize=4096)
def pauli_action(letters: str) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(src, phase)`` with ``(P psi)[c] = phase[c] * psi[src[c]]``.

    Qubit 0 is the leftmost letter, i.e. the most significant bit of the
    basis index.
    """
    n = len(letters)
    xmask = zmask = 0
    n_y = 0
    for q, c in enumerate(letters):
        bit = 1 << (n - 1 - q)
        if c in "XY":
            xmask |= bit
        if c in "ZY":
            zmask |= bit
        n_y += c == "Y"
    idx = np.arange(1 << n, dtype=np.int64)
    src = idx ^ xmask
    signs = 1 - 2 * (np.bitwise_count(src & zmask) & 1).astype(np.int64)
    phase = (1j ** n_y) * signs.astype(complex)
    src.setflags(write=False)
    phase.setflags(write=False)
    return src, phase


def apply_pauli(letters: str, psi: np.ndarray) -> np.ndarray:
    """Apply a Pauli string along the last axis of ``psi``."""
    src, phase = pauli_action(letters)
    return phase * psi[..., src]


def multiply_strings(a: str, b: str) -> tuple[complex, str]:
    """Product of two Pauli strings as ``phase * string``."""
    phase = 1 + 0j
    out = []
    for p, q in zip(a, b):
        if p == "I":
            out.append(q)
        elif q == "I":
            out.append(p)
        elif p == q:
            out.append("I")
        else:
            f, c = _PRODUCT[(p, q)]
            phase *= f
            out.append(c)
    return phase, "".join(out)


@dataclass(frozen=True)
class PauliTerm:
    coefficient: float
    letters: str

    def __post_init__(self):
        if not math.isfinite(self.coefficient):
            raise ValueError("Pauli coefficient must be finite")


class PauliSum:
    """Real-weighted sum of Pauli strings on ``n_qubits`` qubits.

    Duplicate strings are merged on construction and coefficients with
    magnitude below 1e-14 are dropped. Instances are immutable.
    """

    def __init__(self, n_qubits: int, terms: Iterable[PauliTerm | tuple[float, str]] = ()):
        if int(n_qubits) < 1:
            raise ValueError("n_qubits must be positive")
        self._n = int(n_qubits)
        merged: dict[str, float] = {}
        for term in terms:
            if isinstance(term, PauliTerm):
                coef, letters = term.coefficient, term.letters
            else:
                coef, letters = term
            coef = float(coef)
            if not math.isfinite(coef):
                raise ValueError("Pauli coefficient must be finite")
            letters = validate_letters(letters, self._n)
            merged[letters] = merged.get(letters, 0.0) + coef
        self._terms = tuple(
            PauliTerm(c, s) for s, c in merged.items() if abs(c) >= ZERO_TOL
        )

    @classmethod
    def from_dict(cls, n_qubits: int, coefficients: Mapping[str, float]) -> "PauliSum":
        return cls(n_qubits, [(c, s) for s, c in coefficients.items()])

    @classmethod
    def single(cls, letters: str, coefficient: float = 1.0) -> "PauliSum":
        return cls(len(letters), [(coefficient, letters)])

    @classmethod
    def identity(cls, n_qubits: int, coefficient: float = 1.0) -> "PauliSum":
        return cls(n_qubits, [(coefficient, "I" * n_qubits)])

    @classmethod
    def from_records(cls, records: Iterable[Mapping], n_qubits: int | None = None) -> "PauliSum":
        """Build from ``[{"coefficient": c, "string": "XZ"}, ...]``."""
        records = list(records)
        if n_qubits is None:
            if not records:
                raise ValueError("cannot infer the qubit count of an empty record list")
            n_qubits = len(records[0]["string"])
        return cls(n_qubits, [(r["coefficient"], r["string"]) for r in records])

    def to_records(self) -> list[dict]:
        return [{"coefficient": t.coefficient, "string": t.letters} for t in self._terms]

    @property
    def n_qubits(self) -> int:
        return self._n

    @property
    def terms(self) -> tuple[PauliTerm, ...]:
        return self._terms

    @property
    def dim(self) -> int:
        return 1 << self._n

    def as_dict(self) -> dict[str, float]:
        return {t.letters: t.coefficient for t in self._terms}

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([t.coefficient for t in self._terms], dtype=float)

    @property
    def coefficient_norm(self) -> float:
        """Two-norm of the coefficient vector."""
        return float(np.linalg.norm(self.coefficients)) if self._terms else 0.0

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self._n == other._n and self.as_dict() == other.as_dict()

    def __hash__(self) -> int:
        return hash((self._n, frozenset(self.as_dict().items())))

    def __repr__(self) -> str:
        body = " + ".join(f"{t.coefficient:g}*{t.letters}" for t in self._terms) or "0"
        return f"PauliSum({self._n}, {body})"

    def _check_compatible(self, other: "PauliSum") -> None:
        if self._n != other._n:
            raise ValueError("Pauli sums act on different qubit counts")

    def __add__(self, other: "PauliSum") -> "PauliSum":
        self._check_compatible(other)
        return PauliSum(self._n, [*self._terms, *other._terms])

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + (-1.0) * other

    def __neg__(self) -> "PauliSum":
        return (-1.0) * self

    def __mul__(self, scalar: float) -> "PauliSum":
        return PauliSum(self._n, [(scalar * t.coefficient, t.letters) for t in self._terms])

    __rmul__ = __mul__

    @cached_property
    def matrix(self) -> np.ndarray:
        """Dense matrix, built once per instance."""
        m = build_matrix(self)
        m.setflags(write=False)
        return m

    def apply(self, states: np.ndarray) -> np.ndarray:
        """Apply the operator along the last axis of ``states``."""
        if self._n <= DENSE_APPLY_LIMIT:
            return states @ self.matrix.T
        out = np.zeros_like(states, dtype=complex)
        for t in self._terms:
            out += t.coefficient * apply_pauli(t.letters, states)
        return out

    def square(self, cap: int = 4096) -> "PauliSum":
        """Symbolic square via Pauli multiplication, merged."""
        acc: dict[str, complex] = {}
        for a in self._terms:
            for b in self._terms:
                phase, s = multiply_strings(a.letters, b.letters)
                acc[s] = acc.get(s, 0.0) + phase * a.coefficient * b.coefficient
        scale = max(1.0, self.coefficient_norm**2)
        kept = {s: c.real for s, c in acc.items() if abs(c) >= ZERO_TOL * scale}
        if len(kept) > cap:
            raise H2TermBlowup(f"H^2 expansion has {len(kept)} terms, cap is {cap}")
        return PauliSum.from_dict(self._n, kept)


def build_matrix(h: PauliSum) -> np.ndarray:
    check_dense(h.n_qubits)
    d = h.dim
    m = np.zeros((d, d), dtype=complex)
    rows = np.arange(d)
    for t in h.terms:
        src, phase = pauli_action(t.letters)
        m[rows, src] += t.coefficient * phase
    return m


def operator_norm(h: PauliSum | np.ndarray) -> float:
    m = h if isinstance(h, np.ndarray) else build_matrix(h)
    if m.size == 0:
        return 0.0
    w = np.linalg.eigvalsh(m)
    return float(max(abs(w[0]), abs(w[-1])))


@dataclass(frozen=True)
class AdiabaticPath:
    """Linear schedule ``H(lam) = (1 - lam) H_i + lam H_f``."""

    h_initial: PauliSum
    h_final: PauliSum

    def __post_init__(self):
        if self.h_initial.n_qubits != self.h_final.n_qubits:
            raise ValueError("initial and final Hamiltonians act on different qubit counts")

    @property
    def n_qubits(self) -> int:
        return self.h_initial.n_qubits

    @cached_property
    def drive(self) -> PauliSum:
        """The lambda-derivative, ``H_f - H_i``."""
        return self.h_final - self.h_initial

    def at(self, lam: float) -> PauliSum:
        return interpolate(self, lam)


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not (0.0 <= lam <= 1.0):
        raise LambdaOutOfRange(f"lambda={lam} outside [0, 1]")
    return lam


def interpolate(path: AdiabaticPath, lam: float) -> PauliSum:
    lam = _check_lambda(lam)
    a = path.h_initial.as_dict()
    b = path.h_final.as_dict()
    keys = list(a) + [s for s in b if s not in a]
    return PauliSum(
        path.n_qubits,
        [((1.0 - lam) * a.get(s, 0.0) + lam * b.get(s, 0.0), s) for s in keys],
    )


@dataclass(frozen=True)
class PathNorms:
    h_op: float
    dh_op: float
    h2_sup: float
    argmax: float


def _refine_max(f, grid: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    k = int(np.argmax(values))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    best_x, best_v = float(grid[k]), float(values[k])
    if hi > lo:
        res = minimize_scalar(lambda x: -f(x), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-9 * max(1.0, hi)})
        if -res.fun > best_v:
            best_x, best_v = float(res.x), float(-res.fun)
    return best_x, best_v


def path_norm_sup(path: AdiabaticPath, grid: int = 1001) -> PathNorms:
    """Sup over lambda of ``||H(lam)||_op`` and ``||h(lam)||_2``, plus ``||H_f - H_i||_op``."""
    if grid < 2:
        raise ValueError("grid must have at least two points")
    check_dense(path.n_qubits)
    lams = np.linspace(0.0, 1.0, int(grid))
    mi, mf = path.h_initial.matrix, path.h_final.matrix

    def h_norm(lam: float) -> float:
        return operator_norm((1.0 - lam) * mi + lam * mf)

    def coef_norm(lam: float) -> float:
        return interpolate(path, lam).coefficient_norm

    norms = np.array([h_norm(x) for x in lams])
    arg, h_op = _refine_max(h_norm, lams, norms)
    coefs = np.array([coef_norm(x) for x in lams])
    _, h2 = _refine_max(coef_norm, lams, coefs)
    return PathNorms(h_op=h_op, dh_op=operator_norm(path.drive), h2_sup=h2**2, argmax=arg)
