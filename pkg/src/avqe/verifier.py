"""Standard-deviation certificates and the self-verifying tracking loop."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ansatz import Ansatz, energy_and_sigma, prepare
from .bounds import TrackingConstants
from .errors import (CertificateRequired, InvalidParams, NonpositiveGapBound, RetryExceeded,
                     StallDetected, TrackingLost)
from .oracle import PathOracle, branch_index, fidelity
from .pauli import AdiabaticPath, interpolate
from .shots import ShotConfig, estimate_energy_sigma
from .tracker import (SliceRecord, TrackerConfig, attach_oracle, check_guarantee_config,
                      guarantee_constants, optimize_slice)

SIGMA_D_FLOOR = 1e-12
STALL_THRESHOLD = 1e-12
DEFAULT_RETRY_CAP = 100


def fidelity_lower_bound(sigma: float, delta_c: float) -> float:
    """1 - sigma^2 / (delta_c - sigma)^2 when sigma < delta_c / 2, else 0."""
    if not sigma < delta_c / 2:
        return 0.0
    return max(0.0, 1.0 - sigma**2 / (delta_c - sigma) ** 2)


@dataclass
class Certificate:
    lam: float
    sigma_h: float
    sigma_d: float
    delta_c: float
    passed: bool
    strong: bool
    fidelity_lower_bound: float
    branch: int | None = None
    exact_fidelity: float | None = None

    @property
    def dlambda_v(self) -> float:
        """Largest step keeping the propagated sigma below delta_c / 2."""
        if self.sigma_d <= SIGMA_D_FLOOR:
            return math.inf
        return (self.delta_c / 2 - self.sigma_h) / self.sigma_d

    @property
    def dlambda_v_alt(self) -> float:
        """The (delta_c - sigma) / (2 sigma_D) variant, reported for comparison only."""
        if self.sigma_d <= SIGMA_D_FLOOR:
            return math.inf
        return (self.delta_c - self.sigma_h) / (2 * self.sigma_d)


def certificate_from_sigmas(lam: float, sigma_h: float, sigma_d: float, delta_c: float) -> Certificate:
    if not delta_c > 0:
        raise NonpositiveGapBound(f"gap bound must be positive, got {delta_c}")
    passed = sigma_h < delta_c / 2
    return Certificate(
        lam=float(lam), sigma_h=float(sigma_h), sigma_d=float(sigma_d), delta_c=float(delta_c),
        passed=passed, strong=sigma_h <= delta_c / 4,
        fidelity_lower_bound=fidelity_lower_bound(sigma_h, delta_c),
    )


def certify(psi: np.ndarray, path: AdiabaticPath, lam: float, delta_c: float,
            shots: ShotConfig | None = None) -> Certificate:
    if not delta_c > 0:
        raise NonpositiveGapBound(f"gap bound must be positive, got {delta_c}")
    h = interpolate(path, lam)
    if shots is None:
        sigma_h = energy_and_sigma(psi, h).sigma
        sigma_d = energy_and_sigma(psi, path.drive).sigma
    else:
        sigma_h = estimate_energy_sigma(psi, h, shots.derive(0)).sigma
        sigma_d = estimate_energy_sigma(psi, path.drive, shots.derive(1)).sigma
    return certificate_from_sigmas(lam, sigma_h, sigma_d, delta_c)


def adaptive_step(cert: Certificate, dlambda_a: float, remaining: float) -> float:
    if not cert.passed:
        raise CertificateRequired("cannot step from a failing certificate")
    return min(dlambda_a, cert.dlambda_v, remaining)


def propagation_bound(sigma_h: float, sigma_d: float, dlambda: float) -> float:
    return sigma_h + abs(dlambda) * sigma_d


@dataclass
class VerifiedSlice:
    record: SliceRecord
    certificate: Certificate
    retries: int
    dlambda_used: float = float("nan")  # step taken after this slice (nan on the final slice)


@dataclass
class AvqeRunSummary:
    slices: list[VerifiedSlice] = field(default_factory=list)
    completed: bool = False
    n_updates: int = 0
    constants: TrackingConstants | None = None

    @property
    def retries_used(self) -> list[int]:
        return [s.retries for s in self.slices]

    @property
    def final_fidelity_bound(self) -> float:
        return self.slices[-1].certificate.fidelity_lower_bound if self.slices else 0.0

    @property
    def final_lambda(self) -> float:
        return self.slices[-1].certificate.lam if self.slices else 0.0


def run_self_verifying(
    path: AdiabaticPath,
    ansatz: Ansatz,
    theta0,
    delta_c: float,
    config: TrackerConfig,
    retry_cap: int = DEFAULT_RETRY_CAP,
    dlambda_a: float | None = None,
    oracle: PathOracle | None = None,
    constants: TrackingConstants | None = None,
) -> AvqeRunSummary:
    """Optimize, certify, retry on failure, then advance by min(dlambda_A, dlambda_V, 1 - lambda).

    Each slice (including lambda = 0 and lambda = 1) is optimized for K steps
    and certified before the next step is chosen, so the last certificate
    always refers to the final Hamiltonian.
    """
    if not delta_c > 0:
        raise NonpositiveGapBound(f"gap bound must be positive, got {delta_c}")
    if retry_cap < 1:
        raise InvalidParams("retry_cap must be at least 1")
    if config.guarantee:
        if constants is None:
            if config.gamma is None:
                raise InvalidParams("guarantee mode needs a global gamma")
            constants = guarantee_constants(path, ansatz, config.gamma, config.mode)
        bad = check_guarantee_config(config, constants)
        if bad:
            raise InvalidParams("guarantee mode violated: " + "; ".join(bad))
    if dlambda_a is None:
        if config.dlambda is not None:
            dlambda_a = config.dlambda
        elif constants is not None:
            dlambda_a = constants.dlambda_a
        else:
            raise InvalidParams("no dlambda_A: give one explicitly, in the config, or via constants")

    summary = AvqeRunSummary(constants=constants)
    theta = np.array(theta0, dtype=float)
    lam = 0.0
    t = 0
    while True:
        retries = 0
        theta_in = theta
        while True:
            rec = optimize_slice(path, ansatz, theta, lam, config, t=t * (retry_cap + 1) + retries)
            rec.t = t
            summary.n_updates += rec.steps
            theta = rec.theta
            psi = prepare(ansatz, theta)
            cert = certify(psi, path, lam, delta_c, config.shots.derive(t, retries) if config.shots else None)
            if cert.passed:
                break
            retries += 1
            if retries >= retry_cap:
                summary.slices.append(VerifiedSlice(rec, cert, retries))
                raise RetryExceeded(
                    f"lambda={lam:.6f}: certificate failed {retries} consecutive times "
                    f"(sigma={cert.sigma_h:.3e}, delta_c/2={delta_c / 2:.3e})", summary)
        rec.dlambda = lam - (summary.slices[-1].certificate.lam if summary.slices else 0.0)
        if oracle is not None:
            spec = oracle.spectrum(lam)
            info = branch_index(spec, psi)
            cert.branch = info.index
            cert.exact_fidelity = fidelity(psi, spec.ground_state)
            attach_oracle(rec, path, ansatz, oracle, theta_in=theta_in, require_star=config.guarantee)
            if config.guarantee and rec.theta_dist > constants.r_pl / 2:
                summary.slices.append(VerifiedSlice(rec, cert, retries))
                raise TrackingLost(
                    f"lambda={lam:.6f}: |theta - theta*| = {rec.theta_dist:.3e} > r_PL/2", summary.slices)
        entry = VerifiedSlice(rec, cert, retries)
        summary.slices.append(entry)
        if lam >= 1.0:
            summary.completed = True
            return summary
        step = adaptive_step(cert, dlambda_a, 1.0 - lam)
        if step < STALL_THRESHOLD:
            raise StallDetected(f"lambda={lam:.6f}: step {step:.3e} below threshold", summary)
        entry.dlambda_used = step
        lam = 1.0 if lam + step >= 1.0 - 1e-15 else lam + step
        t += 1
