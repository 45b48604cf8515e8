"""Fast invariant suite behind ``bcsgp validate`` (about a minute on one core)."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .dynamics import Problem, evolve, g_alpha
from .extraction import extract_psi
from .gp import GP_DT, GPField, free_gaussian, gp_evolve
from .grids import MacroGrid, MicroGrid, centered_axis
from .potentials import ExternalPotential, PotentialSpec, catalog
from .state import build_pairing, pure_state_from_pairing
from .twobody import (coupling_constant_convolution, coupling_constant_fourier, solve_ground_state,
                      square_well_binding_energy)


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    runtime: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.threshold)

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {self.name}: {self.value:.3e} (limit {self.threshold:.1e}, {self.runtime:.1f}s)"


def _timed(name, threshold, fn) -> Check:
    start = time.perf_counter()
    value = float(fn())
    return Check(name, value, threshold, time.perf_counter() - start)


def _square_well():
    V = catalog()["square_well"]
    gs = solve_ground_state(V, MicroGrid(1, 60.0, 2048))
    exact = square_well_binding_energy(V.params["depth"], V.params["radius"])
    return abs(gs.E_b - exact) / exact


def _coupling_identity():
    worst = 0.0
    for name in ("gaussian_well", "shallow_gaussian", "tabulated_dip"):
        V = catalog()[name]
        grid = MicroGrid(1, 40.0, 512)
        gs = solve_ground_state(V, grid)
        g_f = coupling_constant_fourier(gs, grid)
        g_c = coupling_constant_convolution(gs, V, grid, cross_tol=np.inf)
        worst = max(worst, abs(g_c - g_f) / g_f)
    return worst


def _gp_free_gaussian():
    L, n = 16.0, 256
    x = centered_axis(n, L)
    traj = gp_evolve(GPField(free_gaussian(x, 0.0, 1.0, L), L), None, 0.0, 1.0, 1e-3)
    return np.max(np.abs(traj.final.phi - free_gaussian(x, 1.0, 1.0, L)))


def _gp_mass():
    L, n = 8.0, 256
    x = centered_axis(n, L)
    W = ExternalPotential("cosine", {"amplitude": 1.0}).sample(x, L)
    phi = GPField((np.pi ** -0.25) * np.exp(-x ** 2 / 2) + 0j, L)
    traj = gp_evolve(phi, W, 12.0, 0.2, 1e-3)
    m = np.asarray(traj.mass)
    return np.max(np.abs(m - m[0])) / m[0]


def _gp_energy_drift():
    L, n = 8.0, 256
    x = centered_axis(n, L)
    gs = solve_ground_state(catalog()["gaussian_well"], MicroGrid(1, 40.0, 512))
    W = ExternalPotential("cosine", {"amplitude": 1.0}).sample(x, L)
    phi = GPField((np.pi ** -0.25) * np.exp(-x ** 2 / 2) + 0j, L)
    e = np.asarray(gp_evolve(phi, W, gs.g, 1.0, GP_DT, diag_stride=10).energy)
    return np.max(np.abs(e - e[0])) / abs(e[0])


def _small_state():
    V = PotentialSpec("gaussian_well", {"depth": 6.0, "width": 1.0})
    gs = solve_ground_state(V, MicroGrid(1, 40.0, 512))
    h = 0.25
    grid = MacroGrid(1, 8.0, 256, h)
    psi0 = np.pi ** -0.25 * np.exp(-grid.half_axis() ** 2 / 2)
    state = pure_state_from_pairing(build_pairing(psi0, gs, h, grid), grid)
    return V, gs, grid, psi0, state


def run_checks() -> list:
    checks = [
        _timed("two-body square well E_b relative error", 1e-6, _square_well),
        _timed("coupling constant identity, 3 potentials", 1e-8, _coupling_identity),
        _timed("GP free Gaussian match", 1e-8, _gp_free_gaussian),
        _timed("GP mass conservation", 1e-12, _gp_mass),
        _timed("GP energy drift over T = 1", 1e-8, _gp_energy_drift),
    ]
    V, gs, grid, psi0, state = _small_state()
    h = grid.h
    res = extract_psi(state.alpha, gs, h, 0.0, grid)
    checks.append(Check("round trip extract(build(psi0)) = psi0", float(np.max(np.abs(res.psi - psi0))), 1e-10, 0.0))
    G = g_alpha(state.alpha, Problem(grid, V).V_matrix)
    checks.append(Check("trace of G", abs(np.trace(G)), 1e-12, 0.0))
    W = ExternalPotential("cosine", {"amplitude": 1.0})
    checks.append(_timed("ETD4 trace drift over t = 0.05", 1e-10,
                         lambda: evolve(state, 0.05, 0.005, V, W, scheme="etd4", keep_states=False).drift()["trace"]))
    return checks
