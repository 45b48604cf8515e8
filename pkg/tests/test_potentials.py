import numpy as np
import pytest
from scipy.integrate import quad

from bcsgp.grids import MicroGrid
from bcsgp.potentials import ExternalPotential, PotentialSpec, catalog


def test_catalog_round_trips_through_json_documents():
    for name, V in catalog().items():
        again = PotentialSpec.from_dict(V.to_dict())
        r = np.linspace(0, 5, 17)
        assert np.allclose(again.profile(r), V.profile(r)), name


def test_square_well_edge_takes_midpoint_value():
    V = PotentialSpec("square_well", {"depth": 2.0, "radius": 1.0})
    assert V.profile(1.0) == -1.0
    assert V.profile(0.5) == -2.0 and V.profile(1.5) == 0.0


@pytest.mark.parametrize("name", ["square_well", "gaussian_well"])
@pytest.mark.parametrize("k", [0.0, 0.7, 2.3])
def test_fourier_transform_matches_quadrature_in_1d(name, k):
    V = catalog()[name]
    numeric = 2 * quad(lambda r: float(V.profile(r)) * np.cos(k * r), 0, 20, points=[1.0], limit=200)[0]
    assert np.isclose(V.fourier(np.array([k]), 1)[0], numeric, rtol=1e-9, atol=1e-12)


def test_tabulated_requires_increasing_radii():
    with pytest.raises(ValueError):
        PotentialSpec("tabulated", {"r": [0.0, 1.0, 0.5], "V": [0, 0, 0]})


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        PotentialSpec("lennard_jones", {})


def test_cosine_trap_is_bounded_and_centered():
    x = np.linspace(-4, 4, 101)
    w = ExternalPotential("cosine", {"amplitude": 1.0}).sample(x, 8.0)
    assert w.min() == pytest.approx(0.0) and w[50] == pytest.approx(0.0)
    assert w.max() <= 1.0 + 1e-15


def test_sampled_potential_guards_its_grid():
    grid = MicroGrid(1, 10.0, 64)
    V = PotentialSpec.from_samples(grid, catalog()["gaussian_well"].sample(grid))
    with pytest.raises(ValueError):
        V.sample(MicroGrid(1, 10.0, 128))
