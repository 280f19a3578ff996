"""How the guarantee-mode update count grows as the minimum gap closes.

Scales the final Hamiltonian of the single-qubit path; the gap shrinks roughly
linearly in the scale and the update count should follow Delta_min^-3.
"""

from __future__ import annotations

import numpy as np

from avqe.harness import gap_scaling_point


def main() -> None:
    points = [gap_scaling_point(s) for s in (0.1, 0.2, 0.35, 0.6, 1.0)]
    print(f"{'scale':>6} {'Delta_min':>10} {'slices':>7} {'K':>4} {'updates':>9} {'bound':>10} {'c':>8}")
    for p in points:
        print(f"{p.scale:6.2f} {p.delta_min:10.5f} {p.n_slices:7d} {p.k_steps:4d} {p.n_updates:9d} "
              f"{p.n_updates_bound:10.1f} {p.normalized:8.2f}")
    d = np.log([p.delta_min for p in points])
    n = np.log([p.n_updates for p in points])
    print(f"log-log slope {np.polyfit(d, n, 1)[0]:.3f} (reference 384 ln 2 = {384 * np.log(2):.2f})")


if __name__ == "__main__":
    main()
