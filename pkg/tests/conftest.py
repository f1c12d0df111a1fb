import os

# single worker keeps thread-pool paths deterministic; must be set before strata.config loads
os.environ.setdefault("STRATA_THREADS", "1")

import pytest

from strata.models.profiles import BackgroundFlow, StratifiedConfig
from strata.models.spectrum import SpectrumReport
from strata.models.wave import ReducedConstants, StripGrid, WaveState
from strata.services.config_file import config_from_dict
from strata.services.height_solver import newton_solve
from strata.services.profiles import compute_background
from strata.services.small_amplitude import (
    build_guess,
    compute_constants,
    make_grid,
    required_extent,
)
from strata.services.sturm_liouville import compute_spectrum

EPSILON = 0.04

CONSTANT_DENSITY = {
    "physics": {"density_mode": "eulerian", "gravity": 9.81, "depth": 1.0},
    "density": {"kind": "constant", "value": 1000.0},
    "shear": {"kind": "constant", "value": 1.0},
    "grid": {"p_grid_size": 32, "dq": 0.5},
}

# rho = 1 - p on a uniform laminar height H = p + 1
LINEAR_DENSITY = {
    "physics": {"density_mode": "semi_lagrangian"},
    "density": {"kind": "linear", "value": 1.0, "slope": -1.0},
    "height": {"kind": "constant", "value": 1.0},
    "grid": {"p_grid_size": 40, "dq": 0.5},
}

MILD_DENSITY = {
    "physics": {"density_mode": "semi_lagrangian"},
    "density": {"kind": "linear", "value": 1.0, "slope": -0.3},
    "height": {"kind": "constant", "value": 1.0},
    "grid": {"p_grid_size": 32, "dq": 0.5},
}


@pytest.fixture(scope="session")
def constant_config() -> StratifiedConfig:
    return config_from_dict(CONSTANT_DENSITY)


@pytest.fixture(scope="session")
def constant_bg(constant_config) -> BackgroundFlow:
    return compute_background(constant_config)


@pytest.fixture(scope="session")
def constant_spec(constant_bg) -> SpectrumReport:
    return compute_spectrum(constant_bg)


@pytest.fixture(scope="session")
def constant_consts(constant_bg, constant_spec) -> ReducedConstants:
    return compute_constants(constant_bg, constant_spec)


@pytest.fixture(scope="session")
def constant_grid(constant_bg, constant_consts, constant_config) -> StripGrid:
    return make_grid(
        constant_bg, required_extent(constant_consts, EPSILON), constant_config.dq
    )


@pytest.fixture(scope="session")
def constant_wave(
    constant_bg, constant_spec, constant_consts, constant_grid
) -> WaveState:
    guess = build_guess(
        constant_bg, constant_spec, constant_consts, EPSILON, constant_grid
    )
    return newton_solve(guess.as_state(), constant_bg, constant_grid)


@pytest.fixture(scope="session")
def linear_bg() -> BackgroundFlow:
    return compute_background(config_from_dict(LINEAR_DENSITY))


@pytest.fixture(scope="session")
def linear_spec(linear_bg) -> SpectrumReport:
    return compute_spectrum(linear_bg)


@pytest.fixture(scope="session")
def mild_bg() -> BackgroundFlow:
    return compute_background(config_from_dict(MILD_DENSITY))


@pytest.fixture(scope="session")
def mild_spec(mild_bg) -> SpectrumReport:
    return compute_spectrum(mild_bg)


@pytest.fixture(scope="session")
def mild_consts(mild_bg, mild_spec) -> ReducedConstants:
    return compute_constants(mild_bg, mild_spec)


@pytest.fixture(scope="session")
def mild_grid(mild_bg, mild_consts) -> StripGrid:
    return make_grid(mild_bg, required_extent(mild_consts, EPSILON), 0.5)


@pytest.fixture(scope="session")
def mild_wave(mild_bg, mild_spec, mild_consts, mild_grid) -> WaveState:
    guess = build_guess(mild_bg, mild_spec, mild_consts, EPSILON, mild_grid)
    return newton_solve(guess.as_state(), mild_bg, mild_grid)
