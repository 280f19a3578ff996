"""Warm-started gradient descent along the adiabatic path."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .ansatz import (Ansatz, energy_and_gradient, energy_and_sigma, geometric_tensor, hessian,
                     prepare)
from .bounds import OPTION1, OPTION2, TrackingConstants, tracking_constants
from .errors import (InvalidParams, MaxSlicesExceeded, MinimizerNotConverged, NonfiniteEnergy,
                     SingularMetric, TrackingLost)
from .oracle import PathOracle, fidelity, gap_profile
from .pauli import AdiabaticPath, PauliSum, interpolate, operator_norm, path_norm_sup
from .shots import ShotConfig, noisy_gradient

VANILLA = "vanilla"
NATURAL = "natural_gradient"


@dataclass(frozen=True)
class TrackerConfig:
    eta: float = 0.25
    k_steps: int = 4
    dlambda: float | None = None  # None means "auto": take dlambda_A from the constants
    optimizer: str = VANILLA
    mode: str = OPTION1
    regularizer: float = 1e-8
    max_slices: int = 1_000_000
    guarantee: bool = False
    gamma: float | None = None  # global metric floor, required for guarantee-mode constants
    shots: ShotConfig | None = None
    ng_fallback: bool = True

    def __post_init__(self):
        if not self.eta > 0:
            raise InvalidParams("eta must be positive")
        if self.k_steps < 1:
            raise InvalidParams("K must be a positive integer")
        if self.dlambda is not None and not self.dlambda > 0:
            raise InvalidParams("dlambda must be positive")
        if self.optimizer not in (VANILLA, NATURAL):
            raise InvalidParams(f"unknown optimizer {self.optimizer!r}")
        if self.mode not in (OPTION1, OPTION2):
            raise InvalidParams(f"unknown mode {self.mode!r}")
        if self.mode == OPTION2 and self.k_steps != 1:
            object.__setattr__(self, "k_steps", 1)


@dataclass
class SliceRecord:
    t: int
    lam: float
    theta: np.ndarray
    energy: float
    grad_norm: float
    sigma_h: float
    sigma_d: float
    energy_trace: list[float]
    dlambda: float = float("nan")
    steps: int = 0
    gap: float | None = None
    fidelity: float | None = None
    theta_dist: float | None = None
    theta_dist_in: float | None = None
    contraction: float | None = None
    theta_star: np.ndarray | None = None


@dataclass
class TrackResult:
    records: list[SliceRecord]
    constants: TrackingConstants | None = None
    n_updates: int = 0
    completed: bool = False


def _descent_direction(ansatz: Ansatz, theta: np.ndarray, grad: np.ndarray,
                       config: TrackerConfig) -> np.ndarray:
    if config.optimizer == VANILLA:
        return grad
    g = geometric_tensor(ansatz, theta).g + config.regularizer * np.eye(len(theta))
    try:
        d = scipy.linalg.solve(g, grad, assume_a="pos")
        if np.all(np.isfinite(d)):
            return d
        raise np.linalg.LinAlgError("non-finite natural-gradient direction")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        if not config.ng_fallback:
            raise SingularMetric(str(exc)) from exc
        warnings.warn(f"metric solve failed ({exc}); using a plain gradient step", RuntimeWarning)
        return grad


def optimize_slice(
    path: AdiabaticPath,
    ansatz: Ansatz,
    theta_in,
    lam: float,
    config: TrackerConfig,
    t: int = 0,
    h: PauliSum | None = None,
    callback: Callable[[int, np.ndarray], None] | None = None,
) -> SliceRecord:
    """Run K descent steps on E_lambda from ``theta_in``.

    ``callback(k, theta)`` is invoked after every step.
    """
    h = interpolate(path, lam) if h is None else h
    theta = np.array(theta_in, dtype=float)
    e, grad = energy_and_gradient(ansatz, theta, h)
    trace = [e]
    for k in range(config.k_steps):
        if config.shots is not None:
            grad_used = noisy_gradient(ansatz, theta, h, config.shots.derive(t, k))
        else:
            grad_used = grad
        theta = theta - config.eta * _descent_direction(ansatz, theta, grad_used, config)
        e, grad = energy_and_gradient(ansatz, theta, h)
        if not np.isfinite(e) or not np.all(np.isfinite(theta)):
            raise NonfiniteEnergy(f"energy diverged at slice {t}, step {k}")
        trace.append(e)
        if callback is not None:
            callback(k, theta)
    psi = prepare(ansatz, theta)
    return SliceRecord(
        t=t, lam=float(lam), theta=theta, energy=e, grad_norm=float(np.linalg.norm(grad)),
        sigma_h=energy_and_sigma(psi, h).sigma, sigma_d=energy_and_sigma(psi, path.drive).sigma,
        energy_trace=trace, steps=config.k_steps,
    )


def reference_minimizer(
    ansatz: Ansatz,
    h: PauliSum,
    theta,
    ground_energy: float | None = None,
    tol: float = 1e-12,
    max_steps: int = 100_000,
    energy_tol: float = 1e-9,
) -> np.ndarray:
    """Local minimizer reached from ``theta``.

    Gradient steps with eta = 1/L, accelerated by Newton steps whenever the
    Hessian is positive definite and the step lowers the energy. The result is
    checked against the exact ground energy when one is given.
    """
    theta = np.array(theta, dtype=float)
    big_l = 4.0 * max(operator_norm(h.matrix), 1e-300) * ansatz.n_params
    e, grad = energy_and_gradient(ansatz, theta, h)
    for _ in range(max_steps):
        if np.linalg.norm(grad) <= tol:
            break
        trial = None
        w, u = np.linalg.eigh(hessian(ansatz, theta, h))
        if w[0] > 1e-10 * big_l:
            trial = theta - u @ ((u.T @ grad) / w)
            e_t, g_t = energy_and_gradient(ansatz, trial, h)
            if e_t <= e + 1e-13 or np.linalg.norm(g_t) < np.linalg.norm(grad):
                theta, e, grad = trial, e_t, g_t
                continue
        theta = theta - grad / big_l
        e, grad = energy_and_gradient(ansatz, theta, h)
    else:
        raise MinimizerNotConverged(f"gradient norm {np.linalg.norm(grad):.3e} after {max_steps} steps")
    if np.linalg.norm(grad) > tol:
        raise MinimizerNotConverged(f"gradient norm {np.linalg.norm(grad):.3e} above {tol}")
    if ground_energy is not None and abs(e - ground_energy) > energy_tol:
        raise MinimizerNotConverged(
            f"local minimum energy {e:.12f} differs from ground energy {ground_energy:.12f}")
    return theta


def guarantee_constants(path: AdiabaticPath, ansatz: Ansatz, gamma: float, mode: str = OPTION1,
                        grid: int = 1001) -> TrackingConstants:
    norms = path_norm_sup(path, grid)
    delta = gap_profile(path, grid).delta_min
    return tracking_constants(gamma, delta, ansatz.n_params, norms.h_op, norms.dh_op, mode=mode)


def estimate_gamma(path: AdiabaticPath, ansatz: Ansatz, theta0, n_points: int = 41,
                   oracle: PathOracle | None = None) -> float:
    """Smallest metric eigenvalue along reference minimizers on a lambda grid."""
    oracle = oracle or PathOracle(path)
    theta = np.array(theta0, dtype=float)
    gamma = np.inf
    for lam in np.linspace(0.0, 1.0, n_points):
        h = interpolate(path, lam)
        theta = reference_minimizer(ansatz, h, theta, oracle.ground_energy(lam))
        gamma = min(gamma, geometric_tensor(ansatz, theta).gamma)
    return float(gamma)


def check_guarantee_config(config: TrackerConfig, constants: TrackingConstants) -> list[str]:
    """Return the list of violated guarantee-mode conditions."""
    bad = []
    if config.eta > constants.eta * (1 + 1e-12):
        bad.append(f"eta={config.eta} exceeds 1/L={constants.eta}")
    if config.dlambda is not None and config.dlambda > constants.dlambda_a * (1 + 1e-12):
        bad.append(f"dlambda={config.dlambda} exceeds dlambda_A={constants.dlambda_a}")
    if config.k_steps < constants.k_min:
        bad.append(f"K={config.k_steps} below K_min={constants.k_min}")
    return bad


def _lambda_at(t: int, dlambda: float) -> float:
    lam = t * dlambda
    return 1.0 if lam >= 1.0 - 1e-12 else lam


def attach_oracle(record: SliceRecord, path: AdiabaticPath, ansatz: Ansatz, oracle: PathOracle,
                  theta_in: np.ndarray | None = None, require_star: bool = True) -> None:
    """Fill the oracle columns of ``record`` (gap, fidelity, distance to theta*).

    With ``require_star=False`` an ansatz that cannot reach the exact ground
    energy leaves the distance columns empty instead of raising.
    """
    spec = oracle.spectrum(record.lam)
    record.gap = spec.gap
    record.fidelity = fidelity(prepare(ansatz, record.theta), spec.ground_state)
    h = interpolate(path, record.lam)
    try:
        star = reference_minimizer(ansatz, h, record.theta, spec.ground_energy)
    except MinimizerNotConverged:
        if require_star:
            raise
        return
    record.theta_star = star
    record.theta_dist = float(np.linalg.norm(record.theta - star))
    if theta_in is not None:
        record.theta_dist_in = float(np.linalg.norm(theta_in - star))
        if record.theta_dist_in > 0:
            record.contraction = record.theta_dist / record.theta_dist_in


def track_path(
    path: AdiabaticPath,
    ansatz: Ansatz,
    theta0,
    config: TrackerConfig,
    oracle: PathOracle | None = None,
    constants: TrackingConstants | None = None,
) -> TrackResult:
    theta = np.array(theta0, dtype=float)
    if config.guarantee or config.dlambda is None:
        if constants is None:
            if config.gamma is None:
                raise InvalidParams("guarantee mode and auto dlambda need a global gamma")
            constants = guarantee_constants(path, ansatz, config.gamma, config.mode)
    if config.guarantee:
        bad = check_guarantee_config(config, constants)
        if bad:
            raise InvalidParams("guarantee mode violated: " + "; ".join(bad))
        if oracle is not None:
            start = fidelity(prepare(ansatz, theta), oracle.ground_state(0.0))
            if start < 1 - 1e-8:
                raise InvalidParams(f"theta_0 is not the lambda=0 ground state (fidelity {start:.3e})")
    dlambda = config.dlambda if config.dlambda is not None else constants.dlambda_a

    records: list[SliceRecord] = []
    n_updates = 0
    t = 0
    lam = 0.0
    while lam < 1.0:
        t += 1
        if t > config.max_slices:
            raise MaxSlicesExceeded(f"more than {config.max_slices} slices needed")
        new_lam = _lambda_at(t, dlambda)
        rec = optimize_slice(path, ansatz, theta, new_lam, config, t=t)
        rec.dlambda = new_lam - lam
        n_updates += rec.steps
        if oracle is not None:
            attach_oracle(rec, path, ansatz, oracle, theta_in=theta, require_star=config.guarantee)
            if config.guarantee and rec.theta_dist > constants.r_pl / 2:
                records.append(rec)
                raise TrackingLost(
                    f"slice {t}: |theta - theta*| = {rec.theta_dist:.3e} > r_PL/2 = {constants.r_pl / 2:.3e}",
                    records)
        records.append(rec)
        theta = rec.theta
        lam = new_lam
    return TrackResult(records=records, constants=constants, n_updates=n_updates,
                       completed=True)

