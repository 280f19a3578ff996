"""Certified tracking of the single-qubit path H(lambda) = (1 - lambda) Z + lambda X.

Runs the self-verifying loop in guarantee mode (gamma = 1, the ansatz is a single
Y rotation) and prints the certificate trail next to the exact fidelity.
"""

from __future__ import annotations

from avqe.models import single_qubit
from avqe.oracle import PathOracle
from avqe.tracker import TrackerConfig, guarantee_constants
from avqe.verifier import run_self_verifying


def main() -> None:
    model = single_qubit()
    oracle = PathOracle(model.path)
    c = guarantee_constants(model.path, model.ansatz, gamma=1.0)
    print(f"Delta_min={c.delta_min:.6f}  r_PL={c.r_pl:.7f}  dlambda_A={c.dlambda_a:.7f}  K={c.k_min}")

    cfg = TrackerConfig(eta=c.eta, k_steps=c.k_min, guarantee=True, gamma=1.0)
    run = run_self_verifying(model.path, model.ansatz, model.theta0, c.delta_min, cfg,
                             oracle=oracle, constants=c)
    print(f"{'lambda':>8} {'sigma_H':>10} {'F_lower':>10} {'F_exact':>12} {'step':>9}")
    for s in run.slices[::4] + run.slices[-1:]:
        cert = s.certificate
        step = "-" if s.dlambda_used != s.dlambda_used else f"{s.dlambda_used:.5f}"  # NaN on the last slice
        print(f"{cert.lam:8.4f} {cert.sigma_h:10.2e} {cert.fidelity_lower_bound:10.6f} "
              f"{cert.exact_fidelity:12.9f} {step:>9}")
    print(f"completed={run.completed} slices={len(run.slices)} "
          f"final certified fidelity >= {run.final_fidelity_bound:.6f}")


if __name__ == "__main__":
    main()
