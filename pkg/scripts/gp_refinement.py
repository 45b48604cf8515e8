"""GP energy drift and convergence order against the time step (fixes the default dt).

    python scripts/gp_refinement.py
"""
import numpy as np

from bcsgp.gp import GPField, gp_evolve
from bcsgp.grids import MicroGrid, centered_axis
from bcsgp.potentials import ExternalPotential, catalog
from bcsgp.twobody import solve_ground_state


def main():
    L, n = 8.0, 256
    x = centered_axis(n, L)
    g = solve_ground_state(catalog()["gaussian_well"], MicroGrid(1, 40.0, 512)).g
    W = ExternalPotential("cosine", {"amplitude": 1.0}).sample(x, L)
    phi0 = GPField(np.pi ** -0.25 * np.exp(-x ** 2 / 2) + 0j, L)
    finals = []
    for dt in (1e-3, 5e-4, 2.5e-4, 1e-4, 5e-5):
        traj = gp_evolve(phi0, W, g, 1.0, dt, diag_stride=max(1, int(round(1e-3 / dt))))
        e = np.asarray(traj.energy)
        h1 = np.asarray(traj.h1_norm)
        finals.append(traj.final.phi)
        print(f"dt = {dt:.1e}: energy drift {np.max(np.abs(e - e[0])) / abs(e[0]):.3e}, "
              f"max H1 / initial {h1.max() / h1[0]:.4f}")
    d1 = np.linalg.norm(finals[0] - finals[1])
    d2 = np.linalg.norm(finals[1] - finals[2])
    print(f"order from the first three steps: {np.log2(d1 / d2):.3f}")


if __name__ == "__main__":
    main()
