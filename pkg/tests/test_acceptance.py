"""Acceptance measurements, one PASS/FAIL line each (see the terminal summary).

The slow ones (conservation at N = 1024, the flagship sweep) take tens of
minutes on one core; deselect them with ``-m "not slow"``.
"""
import json
import time
from pathlib import Path

import mpmath
import numpy as np
import pytest

from bcsgp.config import RunConfig
from bcsgp.dynamics import PairBasis, Problem, Stepper, evolve, g_alpha
from bcsgp.extraction import bound_state_on_grid, extract_psi
from bcsgp.gp import GP_DT, GPField, free_gaussian, gp_evolve
from bcsgp.grids import MacroGrid, MicroGrid, centered_axis
from bcsgp.harness import convergence_study
from bcsgp.potentials import ExternalPotential, PotentialSpec, catalog
from bcsgp.state import build_pairing, com_remap, pure_state_from_pairing
from bcsgp.twobody import coupling_constant_convolution, coupling_constant_fourier, solve_ground_state

from conftest import gaussian_profile

ROOT = Path(__file__).resolve().parents[1]
GOLDEN = ROOT / "tests" / "golden" / "pilot.json"
FLAGSHIP = ROOT / "configs" / "default_1d.json"
WELL = PotentialSpec("gaussian_well", {"depth": 6.0, "width": 1.0})
TRAP = ExternalPotential("cosine", {"amplitude": 1.0})


def _even_root(depth, radius):
    def mismatch(E):
        k = mpmath.sqrt((depth - E) / 2)
        kappa = mpmath.sqrt(E / 2)
        return kappa * mpmath.cos(k * radius) - k * mpmath.sin(k * radius)
    return float(mpmath.findroot(mismatch, (mpmath.mpf("0.01"), mpmath.mpf(depth) - mpmath.mpf("0.01")),
                                 solver="anderson"))


def test_criterion_1_square_well_binding_energy(verdict):
    start = time.perf_counter()
    V = catalog()["square_well"]
    gs = solve_ground_state(V, MicroGrid(1, 60.0, 2048))
    runtime = time.perf_counter() - start
    exact = _even_root(V.params["depth"], V.params["radius"])
    rel = abs(gs.E_b - exact) / exact
    assert verdict("criterion 1 square-well E_b vs root of the matching condition", f"{rel:.2e}",
                   "1e-6 rel, < 10 s", rel <= 1e-6 and runtime < 10, runtime)


def test_criterion_2_coupling_identity(verdict):
    start = time.perf_counter()
    worst = 0.0
    names = ["gaussian_well", "shallow_gaussian", "tabulated_dip", "square_well"]
    for name in names:
        V = catalog()[name]
        grid = MicroGrid(1, 60.0, 2048) if name == "square_well" else MicroGrid(1, 40.0, 512)
        gs = solve_ground_state(V, grid)
        g_f = coupling_constant_fourier(gs, grid)
        g_c = coupling_constant_convolution(gs, V, grid, cross_tol=np.inf)
        worst = max(worst, abs(g_c - g_f) / g_f)
    runtime = time.perf_counter() - start
    assert verdict(f"criterion 2 coupling constant by both formulas, {len(names)} potentials", f"{worst:.2e}",
                   "1e-8 rel, < 10 s", worst <= 1e-8 and runtime < 10, runtime)


def test_criterion_3_eigenphase_fidelity(verdict, ground_state):
    start = time.perf_counter()
    h, L = 0.125, 4.0
    grid = MacroGrid(1, L, 256, h)
    # translation-invariant pairing with a small constant amplitude, no trap
    psi0 = np.full(2 * grid.N, 0.05 / np.sqrt(L), dtype=complex)
    state0 = pure_state_from_pairing(build_pairing(psi0, ground_state, h, grid), grid)
    T = 1.0
    traj = evolve(state0, T, 0.0025, WELL, None, scheme="etd4", keep_states=False, diag_stride=100,
                  purity_diagnostics=False)
    a0, at = state0.alpha, traj.final.alpha
    overlap = np.vdot(a0, at)
    fidelity = abs(overlap) / (np.linalg.norm(a0) * np.linalg.norm(at))
    # the bound-state mode rotates at the discrete pair eigenvalue
    omega = -PairBasis(grid, WELL).ground_frequency
    phase_error = abs(np.angle(overlap * np.exp(-1j * omega * T)))
    runtime = time.perf_counter() - start
    print(f"INFO eigenphase: residual phase {phase_error:.2e} rad after removing t E_b/h^2 = {omega * T:.1f}")
    assert verdict("criterion 3 bound-state mode fidelity over t = 1 at h = 1/8", f"1 - {1 - fidelity:.2e}",
                   "1 - 1e-6, < 300 s", fidelity >= 1 - 1e-6 and runtime < 300, runtime)


@pytest.mark.slow
def test_criterion_4_conservation(verdict, ground_state):
    start = time.perf_counter()
    h = 0.125
    grid = MacroGrid(1, 8.0, 1024, h)
    state0 = pure_state_from_pairing(build_pairing(gaussian_profile(grid.half_axis()), ground_state, h, grid), grid)
    traj = evolve(state0, 1.0, 0.002, WELL, TRAP, scheme="etd4", keep_states=False, diag_stride=50)
    drift = traj.drift()
    runtime = time.perf_counter() - start
    results = [
        verdict("criterion 4 trace drift", f"{drift['trace']:.2e}", "1e-6", drift["trace"] <= 1e-6),
        verdict("criterion 4 BCS energy drift", f"{drift['energy']:.2e}", "1e-5", drift["energy"] <= 1e-5),
        verdict("criterion 4 purity defect", f"{drift['purity']:.2e}", "1e-5", drift["purity"] <= 1e-5),
        verdict("criterion 4 symmetry defect before enforcement", f"{drift['symmetry']:.2e}", "1e-6",
                drift["symmetry"] <= 1e-6),
        verdict("criterion 4 runtime at N = 1024", f"{runtime:.0f} s", "1800 s", runtime < 1800),
    ]
    assert all(results)


def _richardson_order(finals):
    return float(np.log2(np.linalg.norm(finals[0] - finals[1]) / np.linalg.norm(finals[1] - finals[2])))


def test_criterion_5_scheme_order(verdict, small_state):
    start = time.perf_counter()
    state0 = small_state[0]
    problem = Problem(state0.grid, WELL, TRAP)
    finals = []
    for dt in (4e-4, 2e-4, 1e-4):
        stepper = Stepper(problem, dt, "strang_rk2")
        finals.append(evolve(state0, 0.02, dt, WELL, TRAP, stepper=stepper, keep_states=False,
                             diag_stride=10 ** 6, purity_diagnostics=False).final.alpha)
    order = _richardson_order(finals)

    # cross-validation against rk4 on a 64-point grid, 100 steps
    small = MacroGrid(1, 2.0, 64, 0.25)
    psi = gaussian_profile(small.half_axis(), width=0.4)
    s64 = pure_state_from_pairing(build_pairing(psi, solve_ground_state(WELL, MicroGrid(1, 40.0, 512)), 0.25, small,
                                                tail_tol=1e-2), small)
    gaps = []
    for dt in (2e-4, 1e-4):
        T = 100 * dt
        a = evolve(s64, T, dt, WELL, TRAP, scheme="strang_rk2", keep_states=False).final.alpha
        b = evolve(s64, T, dt / 4, WELL, TRAP, scheme="rk4", keep_states=False).final.alpha
        gaps.append(np.linalg.norm(a - b) / np.linalg.norm(b) / T)
    cross_order = float(np.log2(gaps[0] / gaps[1]))
    runtime = time.perf_counter() - start
    results = [
        verdict("criterion 5 strang_rk2 global order at N = 256", f"{order:.3f}", ">= 1.8", order >= 1.8),
        verdict("criterion 5 strang_rk2 vs rk4 at N = 64, 100 steps: order of the gap", f"{cross_order:.3f}",
                ">= 1.8", cross_order >= 1.8),
        verdict("criterion 5 runtime", f"{runtime:.0f} s", "600 s", runtime < 600),
    ]
    print(f"INFO strang_rk2 vs rk4 gaps per unit time: {gaps}")
    assert all(results)


def test_criterion_6_gp_solver(verdict, ground_state):
    start = time.perf_counter()
    L, n = 8.0, 256
    x = centered_axis(n, L)
    W = TRAP.sample(x, L)
    phi0 = GPField(gaussian_profile(x), L)
    traj = gp_evolve(phi0, W, ground_state.g, 1.0, GP_DT, diag_stride=10)
    mass, energy = np.asarray(traj.mass), np.asarray(traj.energy)
    mass_drift = float(np.max(np.abs(mass - mass[0])) / mass[0])
    energy_drift = float(np.max(np.abs(energy - energy[0])) / abs(energy[0]))
    Lf = 16.0
    xf = centered_axis(256, Lf)
    free = gp_evolve(GPField(free_gaussian(xf, 0.0, 1.0, Lf), Lf), None, 0.0, 1.0, GP_DT, diag_stride=1000)
    match = float(np.max(np.abs(free.final.phi - free_gaussian(xf, 1.0, 1.0, Lf))))
    runtime = time.perf_counter() - start
    results = [
        verdict("criterion 6 GP mass drift", f"{mass_drift:.2e}", "1e-12", mass_drift <= 1e-12),
        verdict(f"criterion 6 GP energy drift over T = 1 at dt = {GP_DT:g}", f"{energy_drift:.2e}", "1e-8",
                energy_drift <= 1e-8),
        verdict("criterion 6 GP free Gaussian match", f"{match:.2e}", "1e-8", match <= 1e-8),
        verdict("criterion 6 runtime", f"{runtime:.1f} s", "60 s", runtime < 60),
    ]
    assert all(results)


@pytest.fixture(scope="module")
def flagship_sweep(tmp_path_factory):
    config = RunConfig.load(FLAGSHIP)
    out = tmp_path_factory.mktemp("flagship")
    start = time.perf_counter()
    report = convergence_study(config, out_dir=out)
    return report, time.perf_counter() - start


@pytest.mark.slow
def test_criterion_7_headline_convergence(verdict, flagship_sweep):
    report, runtime = flagship_sweep
    slope = report.acceptance["slope"]
    golden = json.loads(GOLDEN.read_text())
    worst = 0.0
    for row in report.rows:
        if row["status"] != "ok" or row["t"] == 0.0:
            continue
        pinned = golden["err"][f"{row['h']:g}"][f"{row['t']:g}"]
        worst = max(worst, abs(row["err"] - pinned) / pinned)
    for t, fit in sorted(report.slopes.items()):
        print(f"INFO slope at t = {t:g}: {fit['slope']} +- {fit['half_width']}")
    results = [
        verdict("criterion 7 slope of log err vs log h at t = 1", f"{slope['value']:.3f}", ">= 0.4",
                slope["pass"]),
        verdict("criterion 7 errors vs pinned pilot values", f"{worst:.2e} rel", "0.1", worst <= 0.1),
        verdict("criterion 7 sweep runtime", f"{runtime:.0f} s", "3600 s", runtime < 3600),
    ]
    assert all(results)


@pytest.mark.slow
def test_criterion_8_residual_scaling(verdict, flagship_sweep):
    report, _ = flagship_sweep
    band = report.acceptance["xi_band"]
    growth = report.acceptance["psi_h1_growth"]
    print(f"INFO energy condition band across h: {report.to_dict()['energy_condition_band']}")
    print(f"INFO largest ||xi_t||^2/h over the sweep: {band['max_over_h']:.3e}")
    for h in sorted({r["h"] for r in report.rows}):
        worst = max(r["xi_l2_sq"] for r in report.rows if r["h"] == h and r["status"] == "ok")
        print(f"INFO h = {h:g}: max_t ||xi_t||^2 = {worst:.3e}")
    results = [
        verdict("criterion 8 max/min of ||xi_t||^2/h over the sweep", f"{band['value']:.3f}", "<= 3",
                band["pass"]),
        verdict("criterion 8 max ||psi_t||_H1 / ||psi_0||_H1", f"{growth['value']:.3f}", "<= 2", growth["pass"]),
    ]
    assert all(results)


def test_criterion_9_structural_invariants(verdict, ground_state, small_grid):
    h = small_grid.h
    psi0 = gaussian_profile(small_grid.half_axis())
    alpha = build_pairing(psi0, ground_state, h, small_grid)
    res = extract_psi(alpha, ground_state, h, 0.0, small_grid)
    round_trip = float(np.max(np.abs(res.psi - psi0)))

    rng = np.random.default_rng(9)
    noise = 1e-4 * rng.normal(size=alpha.shape)
    perturbed = alpha + small_grid.cell * (noise + noise.T)
    res = extract_psi(perturbed, ground_state, h, 0.0, small_grid)
    a = bound_state_on_grid(ground_state, small_grid)
    offsets = np.arange(small_grid.N) - small_grid.N // 2
    orth = 0.0
    for parity in (0, 1):
        sel = offsets % 2 == parity
        orth = max(orth, float(np.max(np.abs(res.xi[parity::2][:, sel] @ a[sel]))) / np.sqrt(a[sel] @ a[sel]))
    field = com_remap(perturbed / small_grid.cell, small_grid)
    total = float(np.sum(np.abs(field.values[field.mask]) ** 2) * small_grid.spacing ** 2)
    parity = np.arange(2 * small_grid.N) % 2
    mode = float(np.sum(np.abs(res.psi) ** 2 * res.mode_norm_sq[parity]) * 0.5 * small_grid.spacing)
    split = abs(total - mode - res.xi_l2_sq) / total

    state = pure_state_from_pairing(alpha, small_grid)
    trace_g = abs(np.trace(g_alpha(state.alpha, Problem(small_grid, WELL).V_matrix)))
    results = [
        verdict("criterion 9 round trip extract(build(psi0)) = psi0", f"{round_trip:.2e}", "1e-10",
                round_trip <= 1e-10),
        verdict("criterion 9 residual orthogonal to the bound-state mode", f"{orth:.2e}", "1e-10", orth <= 1e-10),
        verdict("criterion 9 Pythagorean norm split", f"{split:.2e} rel", "1e-10", split <= 1e-10),
        verdict("criterion 9 trace of G_alpha", f"{trace_g:.2e}", "1e-12", trace_g <= 1e-12),
    ]
    assert all(results)
