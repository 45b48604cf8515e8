import numpy as np
import pytest

from bcsgp.errors import GridMismatch
from bcsgp.extraction import compare_to_gp, extract_psi, reassemble
from bcsgp.grids import MacroGrid
from bcsgp.state import build_pairing, com_remap

from conftest import gaussian_profile


def test_round_trip_recovers_psi0(ground_state, small_state, small_grid):
    state, psi0 = small_state
    res = extract_psi(state.alpha, ground_state, small_grid.h, 0.0, small_grid)
    assert np.max(np.abs(res.psi - psi0)) <= 1e-10
    assert res.xi_l2_sq < 1e-18


def test_residual_is_orthogonal_to_the_mode(ground_state, small_grid):
    rng = np.random.default_rng(3)
    noise = rng.normal(size=(small_grid.N, small_grid.N)) * 1e-3
    alpha = build_pairing(gaussian_profile(small_grid.half_axis()), ground_state, small_grid.h, small_grid)
    alpha = alpha + small_grid.cell * (noise + noise.T)
    res = extract_psi(alpha, ground_state, small_grid.h, 0.0, small_grid)
    from bcsgp.extraction import bound_state_on_grid
    a = bound_state_on_grid(ground_state, small_grid)
    n = small_grid.N
    offsets = np.arange(n) - n // 2
    worst = 0.0
    for parity in (0, 1):
        sel = offsets % 2 == parity
        overlap = res.xi[parity::2][:, sel] @ a[sel]
        worst = max(worst, np.max(np.abs(overlap)) / np.sqrt(a[sel] @ a[sel]))
    assert worst <= 1e-10


def test_pythagorean_split(ground_state, small_grid):
    rng = np.random.default_rng(4)
    noise = rng.normal(size=(small_grid.N, small_grid.N)) * 1e-4
    alpha = build_pairing(gaussian_profile(small_grid.half_axis()), ground_state, small_grid.h, small_grid)
    alpha = alpha + small_grid.cell * (noise + noise.T)
    res = extract_psi(alpha, ground_state, small_grid.h, 0.0, small_grid)
    field = com_remap(alpha / small_grid.cell, small_grid)
    cell = small_grid.spacing ** 2
    total = np.sum(np.abs(field.values[field.mask]) ** 2) * cell
    parity = np.arange(2 * small_grid.N) % 2
    mode_part = np.sum(np.abs(res.psi) ** 2 * res.mode_norm_sq[parity]) * 0.5 * small_grid.spacing
    assert res.xi_l2_sq > 1e-6 * total
    assert abs(total - mode_part - res.xi_l2_sq) / total <= 1e-10


def test_reassemble_inverts_extraction(ground_state, small_state, small_grid):
    state, _ = small_state
    res = extract_psi(state.alpha, ground_state, small_grid.h, 0.37, small_grid)
    field = com_remap(state.alpha / small_grid.cell, small_grid)
    assert np.max(np.abs(reassemble(res, ground_state) - np.where(field.mask, field.values, 0))) < 1e-12


def test_compare_to_gp_accepts_both_grids(ground_state, small_state, small_grid):
    state, psi0 = small_state
    res = extract_psi(state.alpha, ground_state, small_grid.h, 0.0, small_grid)
    assert compare_to_gp(res, psi0, small_grid.L) < 1e-14
    assert compare_to_gp(res, psi0[::2], small_grid.L) < 1e-14
    with pytest.raises(GridMismatch):
        compare_to_gp(res, psi0, 2 * small_grid.L)


def test_resampled_mode_is_unit_normalized(ground_state):
    grid = MacroGrid(1, 8.0, 512, 0.125)
    alpha = build_pairing(gaussian_profile(grid.half_axis()), ground_state, grid.h, grid)
    res = extract_psi(alpha, ground_state, grid.h, 0.0, grid)
    assert res.resampling_residual < 1e-8
