"""Closed-form constants: smoothness, PL radius, drift, step sizes and budgets."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

from .errors import EpsilonTooLarge, NonpositiveInput

OPTION1 = "option1"
OPTION2 = "option2"


def ceil_clean(x: float) -> int:
    """Integer ceiling after rounding away float noise (3.0000000001 -> 3)."""
    return int(math.ceil(round(x, 9)))


def _positive(**values: float) -> None:
    for name, v in values.items():
        if v is None or not (v > 0) or not math.isfinite(v):
            raise NonpositiveInput(f"{name} must be positive and finite, got {v}")


@dataclass(frozen=True)
class TrackingConstants:
    gamma: float
    delta_min: float
    n_params: int
    h_op: float
    dh_op: float
    mode: str
    smoothness: float  # L
    hessian_lipschitz: float  # L_H
    r_pl: float
    drift: float  # D
    dlambda_a: float
    eta: float
    k_min: int
    k_min_raw: float
    n_updates_bound: float
    rho: float
    c_nl: float
    eta_tdvp: float
    eps_target: float | None = None
    t_tdvp_min: float | None = None
    n_tdvp: float | None = None

    @property
    def n_slices(self) -> int:
        return ceil_clean(1.0 / self.dlambda_a)

    def table(self) -> list[tuple[str, str, float]]:
        rows = [
            ("L", "4 |H| M", self.smoothness),
            ("L_H", "24 |H| M^(3/2)", self.hessian_lipschitz),
            ("r_PL", "gamma Delta / L_H", self.r_pl),
            ("D", "sqrt(M) |dH| / (gamma Delta)", self.drift),
            ("eta", "1 / L", self.eta),
        ]
        if self.mode == OPTION1:
            rows += [
                ("dlambda_A", "gamma^2 Delta^2 / (2 L_H sqrt(M) |dH|)", self.dlambda_a),
                ("K_min_raw", "(2 L / (gamma Delta)) ln 2", self.k_min_raw),
                ("K_min", "ceil(K_min_raw)", self.k_min),
                ("N_updates_bound", "384 ln2 M^3 |H|^2 |dH| / (gamma Delta)^3", self.n_updates_bound),
            ]
        else:
            rows += [
                ("dlambda_A", "gamma^2 Delta^2 / (4 L_H L D), K = 1", self.dlambda_a),
                ("K_min", "1", self.k_min),
                ("rho", "sqrt(1 - eta gamma Delta)", self.rho),
                ("N_updates_bound", "384 M^3 |H|^2 |dH| / (gamma Delta)^3", self.n_updates_bound),
            ]
        rows += [
            ("C_nl", "12 |H| M^(3/2)/gamma + 32 |H| M^(5/2)/gamma^2", self.c_nl),
            ("eta_tdvp", "1 / (2 |H|)", self.eta_tdvp),
        ]
        if self.t_tdvp_min is not None:
            rows += [
                ("T_tdvp_min", "max(4 C_nl D / Delta^2, 2 D / (eps Delta))", self.t_tdvp_min),
                ("N_tdvp", "T_tdvp_min / eta_tdvp", self.n_tdvp),
            ]
        return rows

    def as_record(self) -> dict:
        return asdict(self)


def tracking_constants(
    gamma: float,
    delta_min: float,
    n_params: int,
    h_op: float,
    dh_op: float,
    eps_target: float | None = None,
    mode: str = OPTION1,
) -> TrackingConstants:
    _positive(gamma=gamma, delta_min=delta_min, n_params=n_params, h_op=h_op, dh_op=dh_op)
    if eps_target is not None:
        _positive(eps_target=eps_target)
    if mode not in (OPTION1, OPTION2):
        raise ValueError(f"unknown mode {mode!r}")
    m = float(n_params)
    mu = gamma * delta_min
    big_l = 4.0 * h_op * m
    l_h = 24.0 * h_op * m**1.5
    drift = math.sqrt(m) * dh_op / mu
    eta = 1.0 / big_l
    rho = math.sqrt(max(0.0, 1.0 - eta * mu))
    scale = m**3 * h_op**2 * dh_op / mu**3
    if mode == OPTION1:
        dlambda = mu**2 / (2.0 * l_h * math.sqrt(m) * dh_op)
        k_raw = (2.0 * big_l / mu) * math.log(2.0)
        k_min = ceil_clean(k_raw)
        n_bound = 384.0 * math.log(2.0) * scale
    else:
        k_raw, k_min = 1.0, 1
        dlambda = mu**2 / (4.0 * l_h * big_l * drift)
        n_bound = 384.0 * scale
    c_nl = 12.0 * h_op * m**1.5 / gamma + 32.0 * h_op * m**2.5 / gamma**2
    eta_tdvp = 1.0 / (2.0 * h_op)
    t_min = n_tdvp = None
    if eps_target is not None:
        t_min = max(4.0 * c_nl * drift / delta_min**2, 2.0 * drift / (eps_target * delta_min))
        n_tdvp = t_min / eta_tdvp
    return TrackingConstants(
        gamma=gamma, delta_min=delta_min, n_params=int(n_params), h_op=h_op, dh_op=dh_op,
        mode=mode, smoothness=big_l, hessian_lipschitz=l_h, r_pl=mu / l_h, drift=drift,
        dlambda_a=dlambda, eta=eta, k_min=k_min, k_min_raw=k_raw, n_updates_bound=n_bound,
        rho=rho, c_nl=c_nl, eta_tdvp=eta_tdvp, eps_target=eps_target,
        t_tdvp_min=t_min, n_tdvp=n_tdvp,
    )


@dataclass(frozen=True)
class BarrenPlateauBounds:
    dtheta_q: float
    var_lower: float


def bp_bounds(
    eps_q: float,
    gamma: float,
    delta_min: float,
    n_params: int,
    h_op: float,
    deficits: Sequence[float],
) -> BarrenPlateauBounds:
    _positive(eps_q=eps_q, gamma=gamma, delta_min=delta_min, n_params=n_params, h_op=h_op)
    if eps_q >= 1:
        raise NonpositiveInput("eps_q must lie in (0, 1)")
    if any(not (0.0 <= d <= 1.0 + 1e-12) for d in deficits):
        raise NonpositiveInput("tangent deficits must lie in [0, 1]")
    m = float(n_params)
    dtheta = eps_q * gamma * delta_min / (12.0 * m**1.5 * h_op)
    total = float(sum(deficits))
    var_lower = delta_min**6 * eps_q**4 / (12.0**4 * h_op**4 * m**7) * total**2
    return BarrenPlateauBounds(dtheta_q=dtheta, var_lower=var_lower)


@dataclass(frozen=True)
class ShotBounds:
    sigma_grad: float
    s_min: int
    s_min_raw: float


def gradient_noise_sigma(shots: float, n_params: int, h2_sup: float) -> float:
    """Standard deviation of the full parameter-shift gradient, sqrt(2 M |h|^2 / S)."""
    return math.sqrt(2.0 * n_params * h2_sup / shots)


def shot_bounds(
    shots: int,
    n_params: int,
    h2_sup: float,
    hessian_lipschitz: float,
    gamma: float,
    delta_min: float,
    k_steps: int,
    delta_fail: float,
) -> ShotBounds:
    _positive(shots=shots, n_params=n_params, h2_sup=h2_sup, hessian_lipschitz=hessian_lipschitz,
              gamma=gamma, delta_min=delta_min, k_steps=k_steps, delta_fail=delta_fail)
    if delta_fail >= 1:
        raise NonpositiveInput("delta_fail must lie in (0, 1)")
    m = float(n_params)
    log_term = (1.0 + math.sqrt(2.0 * math.log(k_steps / delta_fail) / m)) ** 2
    raw = 8.0 * m * h2_sup * hessian_lipschitz**2 / (gamma**4 * delta_min**4) * log_term
    return ShotBounds(
        sigma_grad=gradient_noise_sigma(shots, n_params, h2_sup),
        s_min=ceil_clean(raw),
        s_min_raw=raw,
    )


@dataclass(frozen=True)
class EpsilonAdjust:
    eps: float
    delta_c: float
    delta_eff: float
    mu_eff: float
    effective: TrackingConstants
    admissible: bool


def epsilon_adjust(constants: TrackingConstants, eps: float, delta_c: float) -> EpsilonAdjust:
    """Recompute the constants with the gap shrunk by the representability error."""
    if eps < 0 or not math.isfinite(eps):
        raise NonpositiveInput("eps must be a finite nonnegative number")
    _positive(delta_c=delta_c)
    if eps >= constants.delta_min:
        raise EpsilonTooLarge(f"eps={eps} leaves no gap (delta_min={constants.delta_min})")
    delta_eff = constants.delta_min - eps
    if eps == 0:
        effective = constants
    else:
        effective = tracking_constants(
            constants.gamma, delta_eff, constants.n_params, constants.h_op, constants.dh_op,
            eps_target=constants.eps_target, mode=constants.mode,
        )
    return EpsilonAdjust(
        eps=eps, delta_c=delta_c, delta_eff=delta_eff, mu_eff=constants.gamma * delta_eff,
        effective=effective, admissible=eps <= delta_c / 4.0,
    )


def with_mode(constants: TrackingConstants, mode: str) -> TrackingConstants:
    return tracking_constants(constants.gamma, constants.delta_min, constants.n_params,
                              constants.h_op, constants.dh_op, constants.eps_target, mode)

