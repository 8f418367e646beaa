import json

import pytest

from simulations.specs import Mode

from .factories import ProblemSpecFactory, SquareGridFactory, config_data


@pytest.fixture(autouse=True)
def isolated_settings(settings, tmp_path):
    """Keep VISCO_* variables of the developer's shell out of the tests."""
    settings.VISCOWAVE = {
        key: None for key in settings.VISCOWAVE if key != "DIRECT_MAX_STEPS"
    } | {"DIRECT_MAX_STEPS": 10_000}
    return settings


@pytest.fixture
def spec():
    return ProblemSpecFactory(seed=0)


@pytest.fixture
def square_spec():
    grid = SquareGridFactory()
    return ProblemSpecFactory(
        domain=grid,
        initial__u0_modes=(Mode((1, 1), 0.05),),
        initial__v0_modes=(Mode((1, 2), 0.05),),
        numerics__dt=0.02,
        numerics__t_end=0.2,
        numerics__linear_solver="cg",
        seed=0,
    )


@pytest.fixture
def config_file(tmp_path):
    def write(data=None, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(config_data() if data is None else data))
        return path

    return write
