"""Conservation diagnostics of the BCS integrator against the time step.

    python scripts/conservation_study.py --h 0.125 --N 1024 --dt 0.005 0.0025 0.002
"""
import argparse
import json

import numpy as np

from bcsgp.dynamics import PairBasis, Problem, Stepper, evolve
from bcsgp.grids import MacroGrid, MicroGrid
from bcsgp.potentials import ExternalPotential, catalog
from bcsgp.state import build_pairing, pure_state_from_pairing
from bcsgp.twobody import solve_ground_state


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--h", type=float, default=0.125)
    parser.add_argument("--N", type=int, default=1024)
    parser.add_argument("--L", type=float, default=8.0)
    parser.add_argument("--T", type=float, default=1.0)
    parser.add_argument("--scheme", default="etd4")
    parser.add_argument("--dt", type=float, nargs="+", default=[0.005, 0.0025, 0.002])
    args = parser.parse_args()

    V = catalog()["gaussian_well"]
    W = ExternalPotential("cosine", {"amplitude": 1.0})
    gs = solve_ground_state(V, MicroGrid(1, 40.0, 512))
    grid = MacroGrid(1, args.L, args.N, args.h)
    x = grid.half_axis()
    psi0 = np.pi ** -0.25 * np.exp(-x ** 2 / 2) + 0j
    state0 = pure_state_from_pairing(build_pairing(psi0, gs, args.h, grid), grid)
    problem = Problem(grid, V, W)
    basis = PairBasis(grid, V) if args.scheme.startswith("etd") else None
    for dt in args.dt:
        stepper = Stepper(problem, dt, args.scheme, basis)
        traj = evolve(state0, args.T, dt, V, W, stepper=stepper, keep_states=False,
                      diag_stride=max(1, int(round(0.1 / dt))))
        print(json.dumps({"dt": dt, "runtime_s": round(traj.runtime, 1), **traj.drift()}), flush=True)


if __name__ == "__main__":
    main()
