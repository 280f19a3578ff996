"""Model families: Hamiltonian paths with a default ansatz and starting angles."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .ansatz import Ansatz
from .errors import InvalidParams
from .pauli import AdiabaticPath, PauliSum


@dataclass(frozen=True)
class Model:
    name: str
    path: AdiabaticPath
    ansatz: Ansatz
    theta0: np.ndarray
    params: dict = field(default_factory=dict)


def _site(n: int, ops: dict[int, str]) -> str:
    return "".join(ops.get(q, "I") for q in range(n))


def transverse_field(n: int, coefficient: float = -1.0) -> PauliSum:
    return PauliSum(n, [(coefficient, _site(n, {q: "X"})) for q in range(n)])


def tfim_hamiltonian(n: int, g: float, j: float = 1.0) -> PauliSum:
    """Open-chain ``-j sum Z_i Z_{i+1} - g sum X_i``."""
    zz = [(-j, _site(n, {q: "Z", q + 1: "Z"})) for q in range(n - 1)]
    return PauliSum(n, zz) + transverse_field(n, -g)


def layered_ansatz(n: int, depth: int) -> tuple[Ansatz, np.ndarray]:
    """Alternating layers: Y on every qubit, then Z_i Y_{i+1} on each bond, and so on.

    Starting angles put pi/4 on the first Y layer, which prepares |+...+>.
    """
    if depth < 1:
        raise InvalidParams("ansatz depth must be at least 1")
    gens: list[str] = []
    theta: list[float] = []
    for layer in range(depth):
        if layer % 2 == 0:
            block = [_site(n, {q: "Y"}) for q in range(n)]
        else:
            block = [_site(n, {q: "Z", q + 1: "Y"}) for q in range(n - 1)]
        gens += block
        theta += [math.pi / 4 if layer == 0 else 0.0] * len(block)
    if not gens:
        raise InvalidParams("ansatz has no generators")
    return Ansatz(tuple(gens), n), np.array(theta)


def parity_ansatz(n: int) -> tuple[Ansatz, np.ndarray]:
    """Ansatz covering the real states of the TFIM symmetry sector.

    Inner generators flip every even-size subset of qubits (X on the subset,
    one Y on its last site), spanning real even-parity states; an outer layer
    of Y rotations at pi/4 maps that sector onto the X-parity-even sector the
    TFIM ground state lives in.
    """
    gens: list[str] = []
    for size in range(2, n + 1, 2):
        for subset in itertools.combinations(range(n), size):
            ops = {q: "X" for q in subset}
            ops[subset[-1]] = "Y"
            gens.append(_site(n, ops))
    n_inner = len(gens)
    gens += [_site(n, {q: "Y"}) for q in range(n)]
    theta = np.array([0.0] * n_inner + [math.pi / 4] * n)
    return Ansatz(tuple(gens), n), theta


def single_qubit(final_scale: float = 1.0, initial_scale: float = 1.0) -> Model:
    if not (final_scale > 0 and initial_scale > 0):
        raise InvalidParams("single_qubit scales must be positive")
    path = AdiabaticPath(PauliSum.single("Z", initial_scale), PauliSum.single("X", final_scale))
    return Model("single_qubit", path, Ansatz(("Y",), 1), np.array([math.pi / 2]),
                 {"final_scale": final_scale, "initial_scale": initial_scale})


def tfim(n: int = 4, g: float = 1.0, depth: int | None = None, template: str = "layered",
         j: float = 1.0) -> Model:
    if n < 2:
        raise InvalidParams("tfim needs n >= 2")
    if not (math.isfinite(g) and math.isfinite(j)):
        raise InvalidParams("field g and coupling j must be finite")
    path = AdiabaticPath(transverse_field(n), tfim_hamiltonian(n, g, j))
    if template == "layered":
        depth = depth if depth is not None else math.ceil(3 * n / 2)
        ansatz, theta0 = layered_ansatz(n, depth)
    elif template == "parity":
        ansatz, theta0 = parity_ansatz(n)
    else:
        raise InvalidParams(f"unknown tfim ansatz template {template!r}")
    return Model("tfim", path, ansatz, theta0, {"n": n, "g": g, "j": j, "depth": depth, "template": template})


def random_2local(n: int = 3, n_terms: int = 6, scale: float = 1.0, seed: int = 0,
                  depth: int | None = None) -> Model:
    """Random two-local final Hamiltonian reached from the transverse-field start."""
    if n < 2 or n_terms < 1 or not scale > 0:
        raise InvalidParams("random_2local needs n >= 2, n_terms >= 1 and scale > 0")
    rng = np.random.default_rng(seed)
    terms = []
    for _ in range(n_terms):
        a, b = sorted(rng.choice(n, size=2, replace=False))
        la, lb = rng.choice(list("XYZ"), size=2)
        terms.append((float(scale * rng.normal()), _site(n, {int(a): str(la), int(b): str(lb)})))
    path = AdiabaticPath(transverse_field(n), PauliSum(n, terms))
    ansatz, theta0 = layered_ansatz(n, depth if depth is not None else math.ceil(3 * n / 2))
    return Model("random_2local", path, ansatz, theta0,
                 {"n": n, "n_terms": n_terms, "scale": scale, "seed": seed, "depth": depth})


FAMILIES = {"single_qubit": single_qubit, "tfim": tfim, "random_2local": random_2local}


def build_model(family: str, params: dict | None = None, seed: int | None = None) -> Model:
    params = dict(params or {})
    if family not in FAMILIES:
        raise InvalidParams(f"unknown model family {family!r}")
    if family == "random_2local" and seed is not None:
        params.setdefault("seed", seed)
    try:
        return FAMILIES[family](**params)
    except TypeError as exc:
        raise InvalidParams(str(exc)) from exc
