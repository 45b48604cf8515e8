import json
import math
from pathlib import Path

import numpy as np
import pytest

from bcsgp.config import RunConfig, initial_profile
from bcsgp.errors import ResolutionError
from bcsgp.grids import centered_axis

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.mark.parametrize("name", ["default_1d.json", "square_well.json"])
def test_shipped_configs_load_and_validate(name):
    config = RunConfig.load(CONFIGS / name)
    config.validate()


def test_round_trip_through_json(tmp_path):
    config = RunConfig(h=[0.5, 0.25, 0.125], checkpoints=[1.0, 0.0])
    config.dump(tmp_path / "c.json")
    again = RunConfig.load(tmp_path / "c.json")
    assert again.to_dict() == config.to_dict()
    assert again.checkpoints == [0.0, 1.0]
    assert math.isinf(again.tolerances.step_tol)


def test_unknown_keys_rejected():
    with pytest.raises(ValueError):
        RunConfig.from_dict({"hh": [0.1]})


def test_grid_size_from_points_per_pair():
    config = RunConfig(L_X=8.0, rho=8.0)
    assert config.grid_size(0.25) == 256
    assert config.grid_size(0.0625) == 1024


def test_underresolved_h_rejected():
    with pytest.raises(ResolutionError):
        RunConfig(h=[0.25], N=[64]).validate()


def test_bad_checkpoint_rejected():
    with pytest.raises(ValueError):
        RunConfig(T=1.0, checkpoints=[2.0]).validate()


@pytest.mark.parametrize("kind", ["gaussian", "two_bump", "plane_wave"])
def test_profiles_have_requested_norm(kind):
    L = 16.0
    x = centered_axis(1024, L)
    f = initial_profile({"kind": kind, "amplitude": 0.7, "width": 0.7}, x, L)
    assert np.isclose(np.sqrt(np.sum(np.abs(f) ** 2) * L / 1024), 0.7, rtol=1e-6)


def test_schema_lists_every_field():
    schema = json.loads((CONFIGS.parent / "schema" / "runconfig.json").read_text())
    assert set(schema["properties"]) == set(RunConfig().to_dict())
