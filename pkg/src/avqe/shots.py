"""Finite-shot measurement simulation.

Every Pauli term gets its own batch of shots drawn from a Philox stream keyed
by ``(seed, *cfg.key, shift, stream, term)``, so results do not depend on
evaluation order and repeated calls with the same inputs are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .ansatz import Ansatz, energy_and_gradient, prepare
from .bounds import gradient_noise_sigma
from .errors import InvalidParams
from .pauli import PauliSum, apply_pauli

BERNOULLI = "bernoulli"
GAUSSIAN = "gaussian_proxy"
H2_TERM_CAP = 4096

_ENERGY_STREAM = 0
_SQUARE_STREAM = 1
_GAUSS_STREAM = 2


@dataclass(frozen=True)
class ShotConfig:
    shots: int
    seed: int = 0
    model: str = BERNOULLI
    key: tuple[int, ...] = ()
    # gaussian proxy: sup_lambda |h(lambda)|_2^2, defaults to the given H's own value
    h2_sup: float | None = None
    # gaussian proxy: explicit total noise std, overrides the shot formula
    sigma: float | None = None

    def __post_init__(self):
        if int(self.shots) < 1:
            raise InvalidParams("shots per term must be at least 1")
        if self.model not in (BERNOULLI, GAUSSIAN):
            raise InvalidParams(f"unknown shot model {self.model!r}")

    def derive(self, *key: int) -> "ShotConfig":
        """Child config with an extended stream key (e.g. per slice and step)."""
        return replace(self, key=self.key + tuple(int(k) for k in key))


def _rng(cfg: ShotConfig, *index: int) -> np.random.Generator:
    seq = np.random.SeedSequence(int(cfg.seed) & 0xFFFFFFFFFFFFFFFF,
                                 spawn_key=cfg.key + tuple(int(i) for i in index))
    return np.random.Generator(np.random.Philox(seq))


def _sample(expectation: float, shots: int, rng: np.random.Generator) -> float:
    p_plus = min(1.0, max(0.0, 0.5 * (1.0 + expectation)))
    k = rng.binomial(shots, p_plus)
    return (2.0 * k - shots) / shots


def exact_expectation(psi: np.ndarray, letters: str) -> float:
    return float(np.vdot(psi, apply_pauli(letters, psi)).real)


def sample_pauli_expectation(psi: np.ndarray, letters: str, cfg: ShotConfig,
                             term: int = 0, shift: int = 0) -> float:
    """Mean of ``cfg.shots`` +-1 outcomes of measuring ``letters`` on ``psi``."""
    return _sample(exact_expectation(psi, letters), int(cfg.shots),
                   _rng(cfg, shift, _ENERGY_STREAM, term))


def _estimate(psi: np.ndarray, h: PauliSum, cfg: ShotConfig, shift: int, stream: int) -> float:
    total = 0.0
    for idx, t in enumerate(h.terms):
        if set(t.letters) == {"I"}:
            total += t.coefficient
            continue
        val = _sample(exact_expectation(psi, t.letters), int(cfg.shots), _rng(cfg, shift, stream, idx))
        total += t.coefficient * val
    return total


def estimate_energy(psi: np.ndarray, h: PauliSum, cfg: ShotConfig, shift: int = 0) -> float:
    return _estimate(psi, h, cfg, shift, _ENERGY_STREAM)


@lru_cache(maxsize=64)
def squared(h: PauliSum, cap: int = H2_TERM_CAP) -> PauliSum:
    return h.square(cap=cap)


@dataclass(frozen=True)
class EnergySigmaEstimate:
    energy: float
    sigma: float


def estimate_energy_sigma(psi: np.ndarray, h: PauliSum, cfg: ShotConfig,
                          shift: int = 0) -> EnergySigmaEstimate:
    """Sampled energy and standard deviation; the second moment comes from
    measuring the Pauli expansion of H^2 with its own shot batches."""
    e = _estimate(psi, h, cfg, shift, _ENERGY_STREAM)
    second = _estimate(psi, squared(h), cfg, shift, _SQUARE_STREAM)
    return EnergySigmaEstimate(e, float(np.sqrt(max(0.0, second - e * e))))


def parameter_shift_gradient(ansatz: Ansatz, theta, h: PauliSum, cfg: ShotConfig) -> np.ndarray:
    """Shift rule for ``exp(-i theta P)``: dE/dtheta_k = E(theta + pi/4 e_k) - E(theta - pi/4 e_k)."""
    theta = np.asarray(theta, dtype=float)
    grad = np.empty(theta.shape[0])
    for k in range(theta.shape[0]):
        plus, minus = theta.copy(), theta.copy()
        plus[k] += np.pi / 4
        minus[k] -= np.pi / 4
        grad[k] = (estimate_energy(prepare(ansatz, plus), h, cfg, shift=2 * k + 1)
                   - estimate_energy(prepare(ansatz, minus), h, cfg, shift=2 * k + 2))
    return grad


def gaussian_sigma(cfg: ShotConfig, n_params: int, h: PauliSum) -> float:
    if cfg.sigma is not None:
        return float(cfg.sigma)
    h2 = cfg.h2_sup if cfg.h2_sup is not None else h.coefficient_norm**2
    return gradient_noise_sigma(cfg.shots, n_params, h2)


def noisy_gradient(ansatz: Ansatz, theta, h: PauliSum, cfg: ShotConfig) -> np.ndarray:
    if cfg.model == BERNOULLI:
        return parameter_shift_gradient(ansatz, theta, h, cfg)
    _, grad = energy_and_gradient(ansatz, theta, h)
    sigma = gaussian_sigma(cfg, ansatz.n_params, h)
    if sigma == 0.0:
        return grad
    per_component = sigma / np.sqrt(ansatz.n_params)
    return grad + _rng(cfg, 0, _GAUSS_STREAM, 0).normal(0.0, per_component, ansatz.n_params)
