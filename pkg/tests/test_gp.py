import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bcsgp.errors import NonFiniteField
from bcsgp.gp import GPField, free_gaussian, gp_energy, gp_evolve, gp_h1_norm, gp_step
from bcsgp.grids import centered_axis
from bcsgp.potentials import ExternalPotential

L, N = 8.0, 128
X = centered_axis(N, L)


def test_plane_wave_dispersion_is_exact():
    k = 2 * np.pi * 3 / L
    phi = GPField(np.exp(1j * k * X), L)
    out = gp_evolve(phi, None, 0.0, 0.7, 1e-2).final
    assert np.max(np.abs(out.phi - np.exp(-0.5j * 0.7 * k * k) * phi.phi)) < 1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 31 - 1), st.floats(min_value=0.0, max_value=20.0))
def test_step_preserves_mass(seed, g):
    rng = np.random.default_rng(seed)
    phi = GPField(rng.normal(size=N) + 1j * rng.normal(size=N), L)
    W = ExternalPotential("cosine", {"amplitude": 1.0}).sample(X, L)
    out = gp_step(phi, W, g, 1e-2)
    assert abs(out.mass - phi.mass) / phi.mass <= 1e-12


def test_zero_field_has_zero_energy():
    assert gp_energy(GPField(np.zeros(N, complex), L), None, 3.0) == 0.0


def test_plane_wave_energy_closed_form():
    k, g = 2 * np.pi * 2 / L, 1.7
    phi = GPField(np.exp(1j * k * X), L)
    assert np.isclose(gp_energy(phi, None, g), 0.5 * k * k * L + g * L, rtol=1e-13)


def test_zero_time_is_identity():
    phi = GPField(free_gaussian(X, 0.0, 1.0, L), L)
    assert np.array_equal(gp_evolve(phi, None, 5.0, 0.0).final.phi, phi.phi)


def test_free_gaussian_oracle():
    Lb, n = 16.0, 256
    x = centered_axis(n, Lb)
    traj = gp_evolve(GPField(free_gaussian(x, 0.0, 1.0, Lb), Lb), None, 0.0, 1.0, 1e-3)
    assert np.max(np.abs(traj.final.phi - free_gaussian(x, 1.0, 1.0, Lb))) <= 1e-8


def test_gauge_covariance():
    W = ExternalPotential("cosine", {"amplitude": 1.0}).sample(X, L)
    phi = GPField(free_gaussian(X, 0.0, 1.0, L), L)
    c, T = 0.3, 0.5
    a = gp_evolve(phi, W, 5.0, T, 1e-3).final.phi
    b = gp_evolve(phi, W + c, 5.0, T, 1e-3).final.phi
    assert np.max(np.abs(b - np.exp(-2j * c * T) * a)) < 1e-12


def test_second_order_under_dt_halving():
    W = ExternalPotential("cosine", {"amplitude": 1.0}).sample(X, L)
    phi = GPField(free_gaussian(X, 0.0, 1.0, L), L)
    finals = [gp_evolve(phi, W, 12.0, 0.5, dt).final.phi for dt in (4e-3, 2e-3, 1e-3)]
    order = np.log2(np.linalg.norm(finals[0] - finals[1]) / np.linalg.norm(finals[1] - finals[2]))
    assert order >= 1.9


def test_h1_norm_of_plane_wave():
    k = 2 * np.pi / L
    phi = GPField(np.exp(1j * k * X) / np.sqrt(L), L)
    assert np.isclose(gp_h1_norm(phi), np.sqrt(1 + k * k))


def test_blow_up_is_reported():
    phi = GPField(free_gaussian(X, 0.0, 1.0, L) * 1e200, L)
    with pytest.raises(NonFiniteField):
        with np.errstate(all="ignore"):
            gp_evolve(phi, None, 1e200, 0.01, 1e-3)


def test_checkpoints_are_recorded():
    phi = GPField(free_gaussian(X, 0.0, 1.0, L), L)
    traj = gp_evolve(phi, None, 1.0, 0.2, 1e-2, checkpoints=[0.1])
    assert sorted(traj.checkpoints) == [0.0, 0.1, 0.2]
    with pytest.raises(ValueError):
        gp_evolve(phi, None, 1.0, 0.2, 1e-2, checkpoints=[0.3])


def test_h1_norm_stays_bounded_on_the_flagship_problem(ground_state):
    # oracle: sup_t ||phi_t||_H1 / ||phi_0||_H1 = 2.0782 over T = 5 at dt = 2.5e-4
    W = ExternalPotential("cosine", {"amplitude": 1.0}).sample(centered_axis(256, L), L)
    phi = GPField(free_gaussian(centered_axis(256, L), 0.0, 1.0, L), L)
    traj = gp_evolve(phi, W, ground_state.g, 5.0, 1e-3, diag_stride=10)
    h1 = np.asarray(traj.h1_norm)
    assert h1.max() / h1[0] <= 2.0782 * 1.01


def test_evolve_matches_repeated_steps():
    W = np.cos(X)
    phi = GPField(np.exp(-X ** 2) + 0j, L)
    stepped = phi
    for _ in range(37):
        stepped = gp_step(stepped, W, 3.0, 1e-2)
    merged = gp_evolve(phi, W, 3.0, 0.37, 1e-2, checkpoints=(0.2,))
    assert np.max(np.abs(merged.final.phi - stepped.phi)) < 1e-12
    assert 0.2 in merged.checkpoints
