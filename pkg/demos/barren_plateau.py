"""Empirical gradient variance inside the Haar-ball against its lower bound."""

from __future__ import annotations

from avqe.harness import bp_sweep, make_context, validate_config


def main() -> None:
    for family, params in [("single_qubit", {}), ("tfim", {"n": 3, "template": "parity"})]:
        ctx = make_context(validate_config({"model": {"family": family, "params": params}}))
        print(f"{family} {params}")
        for r in bp_sweep(ctx, [0.25, 0.5, 0.75], 0.5, 50_000, seed=1):
            print(f"  lambda={r.lam:.2f} var={r.empirical_var:.3e} lower={r.var_lower:.3e} "
                  f"ratio={r.empirical_var / r.var_lower:6.2f} pass={r.passed}")


if __name__ == "__main__":
    main()
