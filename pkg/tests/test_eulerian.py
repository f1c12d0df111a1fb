import math

import numpy as np
import pytest

from strata.exceptions.model_exceptions import StagnationError
from strata.models.wave import WaveState
from strata.services.diagnostics import column_flow_force
from strata.services.eulerian import (
    eulerian_flow_force,
    field_rows,
    mass_flux,
    raster,
    raster_rows,
    reconstruct,
    roundtrip_check,
    sidecar,
    surface_rows,
    to_dimensional,
)


@pytest.fixture(scope="module")
def wave_field(constant_wave, constant_bg, constant_grid):
    return reconstruct(constant_wave, constant_bg, constant_grid)


def test_laminar_field_is_hydrostatic(constant_bg, constant_grid):
    F = 1.2
    state = WaveState(w=np.zeros((constant_grid.Nq + 1, constant_grid.Np + 1)), F=F)
    field = reconstruct(state, constant_bg, constant_grid)
    p = constant_grid.p_nodes
    np.testing.assert_allclose(field.u_rel, -1.0, atol=1e-12)
    np.testing.assert_allclose(field.v, 0.0)
    expected_P = np.broadcast_to(-p / F**2, field.P.shape)
    np.testing.assert_allclose(field.P, expected_P, atol=1e-12)
    np.testing.assert_allclose(field.psi[0], -p)
    assert field.Q_bern_mismatch == pytest.approx(0.0, abs=1e-14)
    assert field.wave_speed == pytest.approx(1 / (F * math.sqrt(9.81)))


def test_surface_pressure_vanishes(wave_field):
    np.testing.assert_allclose(wave_field.P[:, -1], 0.0, atol=1e-9)
    assert wave_field.Q_bern_mismatch < 1e-9


def test_pressure_positive_inside(wave_field):
    assert np.all(wave_field.P[:, :-1] > 0)


def test_roundtrip(wave_field, constant_bg):
    assert roundtrip_check(wave_field, constant_bg) < 1e-10


def test_mass_flux_is_one(wave_field):
    np.testing.assert_allclose(mass_flux(wave_field), 1.0, atol=1e-12)


def test_flow_force_agrees_with_semi_lagrangian(
    wave_field, constant_wave, constant_bg, constant_grid
):
    S_y = eulerian_flow_force(wave_field)
    S_p = column_flow_force(constant_wave, constant_bg, constant_grid)
    np.testing.assert_allclose(S_y, S_p, rtol=1e-3)


def test_surface_is_displacement(wave_field, constant_wave):
    np.testing.assert_array_equal(wave_field.eta, constant_wave.w[:, -1])
    assert wave_field.eta[0] == wave_field.eta.max()


def test_dimensional_scales(wave_field, constant_bg):
    F = wave_field.F
    dimensional = to_dimensional(wave_field, constant_bg, F)
    velocity = F * math.sqrt(9.81)
    assert dimensional.dimensional
    np.testing.assert_allclose(dimensional.u, wave_field.u * velocity)
    np.testing.assert_allclose(dimensional.rho, 1000.0 * wave_field.rho)
    np.testing.assert_allclose(
        dimensional.P, wave_field.P * F**2 * 9.81 * 1000.0
    )
    np.testing.assert_allclose(
        mass_flux(dimensional), constant_bg.scales.mass_flux(F), rtol=1e-12
    )
    assert to_dimensional(dimensional, constant_bg, F) is dimensional


def test_raster(wave_field):
    grid = raster(wave_field, 21)
    assert grid.u.shape == (len(wave_field.x_nodes), 21)
    # tail columns end below the crest height
    assert np.isnan(grid.u[-1, -1])
    assert not np.isnan(grid.u[0, -1])
    assert not np.any(np.isnan(grid.P[:, 0]))
    rows = raster_rows(grid)
    assert len(rows) == grid.u.size


def test_raster_needs_two_rows(wave_field):
    with pytest.raises(ValueError):
        raster(wave_field, 1)


def test_rows(wave_field):
    rows = field_rows(wave_field)
    assert len(rows) == wave_field.P.size
    assert set(rows[0]) == {"x", "y", "u", "v", "P", "psi"}
    assert len(surface_rows(wave_field)) == len(wave_field.x_nodes)
    meta = sidecar(wave_field)
    assert meta["dimensional"] is False
    assert meta["scales"]["rho0"] == 1000.0


def test_stagnant_state(constant_bg, constant_grid):
    w = np.zeros((constant_grid.Nq + 1, constant_grid.Np + 1))
    w[3] = -1.5 * (constant_grid.p_nodes + 1)
    with pytest.raises(StagnationError):
        reconstruct(WaveState(w=w, F=1.1), constant_bg, constant_grid)
