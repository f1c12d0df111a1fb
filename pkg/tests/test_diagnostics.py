import math

import numpy as np
import pytest

from strata.enums import CheckStatus
from strata.exceptions.model_exceptions import DomainError, PreconditionError
from strata.models.wave import WaveState
from strata.services.diagnostics import (
    NODAL_PROPERTIES,
    check_flow_force,
    conjugate_flow_scan,
    crest_identity,
    diagnose,
    froude_identity,
    froude_upper_bound,
    nodal_properties,
    pressure_velocity_bounds,
    shoot_conjugate,
    summary_row,
)
from strata.services.eulerian import reconstruct, to_dimensional
from strata.services.height_solver import refine_grid


@pytest.fixture(scope="module")
def constant_report(constant_wave, constant_bg, constant_grid, constant_spec):
    return diagnose(constant_wave, constant_bg, constant_grid, constant_spec)


@pytest.fixture(scope="module")
def laminar(constant_grid):
    return WaveState(
        w=np.zeros((constant_grid.Nq + 1, constant_grid.Np + 1)),
        F=1.1,
        converged=True,
        residual_norm=0.0,
    )


def test_laminar_identities(laminar, constant_bg, constant_grid, constant_spec):
    assert check_flow_force(laminar, constant_bg, constant_grid) == pytest.approx(
        0.0, abs=1e-14
    )
    assert crest_identity(laminar, constant_bg, constant_grid) == 0.0
    identity = froude_identity(laminar, constant_bg, constant_spec, constant_grid)
    assert identity.residual == 0.0


def test_flow_force_is_conserved(constant_wave, constant_bg, constant_grid):
    assert check_flow_force(constant_wave, constant_bg, constant_grid) < 1e-4


def test_flow_force_threads(monkeypatch, constant_wave, constant_bg, constant_grid):
    from strata.config import settings

    serial = check_flow_force(constant_wave, constant_bg, constant_grid)
    monkeypatch.setattr(settings, "threads", 4)
    assert check_flow_force(constant_wave, constant_bg, constant_grid) == pytest.approx(
        serial, rel=1e-12
    )


def test_froude_identity(constant_wave, constant_bg, constant_grid, constant_spec):
    identity = froude_identity(constant_wave, constant_bg, constant_spec, constant_grid)
    # A(1/F^2) < 0 for supercritical F
    assert identity.A_value < 0
    assert identity.first_integral > 0
    assert identity.residual is not None
    assert identity.residual < 5e-2
    assert abs(identity.boundary_defect) < 1e-6


def test_froude_identity_needs_decayed_tails(
    constant_wave, constant_bg, constant_spec, constant_grid
):
    from strata.services.small_amplitude import make_grid

    short = make_grid(constant_bg, 20.0, constant_grid.dq)
    state = WaveState(
        w=constant_wave.w[: short.Nq + 1], F=constant_wave.F, converged=True
    )
    identity = froude_identity(state, constant_bg, constant_spec, short)
    assert identity.residual is None
    assert "tails" in identity.reason


def test_crest_identity(constant_wave, constant_bg, constant_grid):
    assert crest_identity(constant_wave, constant_bg, constant_grid) < 5e-2


def test_froude_upper_bound(constant_wave, constant_bg, constant_grid):
    margin = froude_upper_bound(constant_wave, constant_bg, constant_grid)
    assert margin > 0


def test_nodal_properties(constant_wave, constant_grid):
    flags, elevation = nodal_properties(constant_wave, constant_grid)
    assert set(flags) == set(NODAL_PROPERTIES)
    assert all(v == CheckStatus.PASS for v in flags.values())
    assert elevation == CheckStatus.PASS


def test_depression_fails_elevation(constant_wave, constant_grid):
    flipped = WaveState(w=-constant_wave.w, F=constant_wave.F)
    flags, elevation = nodal_properties(flipped, constant_grid)
    assert elevation == CheckStatus.FAIL
    assert flags["hq"] == CheckStatus.FAIL


def test_shoot_conjugate_constant_density(constant_bg):
    K, K_p = shoot_conjugate(constant_bg, 1.1, np.array([0.5, 1.0, 2.0]))
    np.testing.assert_allclose(K_p, np.broadcast_to([0.5, 1.0, 2.0], K_p.shape))
    np.testing.assert_allclose(K[-1], [0.5, 1.0, 2.0])


def test_shoot_conjugate_rejects_nonpositive_seeds(constant_bg):
    with pytest.raises(DomainError):
        shoot_conjugate(constant_bg, 1.1, [0.0, 1.0])


def test_conjugate_scan_constant_density(constant_bg):
    F = 1.1
    mu = 1 / F**2
    scan = conjugate_flow_scan(constant_bg, F)
    seeds = sorted(c.shooting_parameter for c in scan.candidates)
    # K = s (p+1); the top condition gives s = 1 and 2 mu s^2 = s + 1
    conjugate = (1 + math.sqrt(1 + 8 * mu)) / (4 * mu)
    assert seeds[0] == pytest.approx(1.0)
    assert seeds[-1] == pytest.approx(conjugate, rel=1e-8)
    assert scan.consistent_with_no_bores
    trivial = [c for c in scan.candidates if c.trivial]
    assert len(trivial) == 1


def test_conjugate_scan_needs_positive_F(constant_bg):
    with pytest.raises(PreconditionError):
        conjugate_flow_scan(constant_bg, 0.0)


def test_pressure_velocity_bounds(
    constant_wave, constant_bg, constant_grid, constant_spec
):
    field = reconstruct(constant_wave, constant_bg, constant_grid)
    bounds = pressure_velocity_bounds(
        field, constant_bg, constant_wave.F, constant_spec.F_cr
    )
    # no density gradient, so no pressure correction is needed
    assert bounds.M_pressure == 0.0
    assert bounds.pressure_bound_min >= -1e-8
    assert bounds.velocity_bound_margin > 0
    assert bounds.gradient_bound_margin > 0
    with pytest.raises(PreconditionError):
        pressure_velocity_bounds(
            to_dimensional(field, constant_bg, constant_wave.F),
            constant_bg,
            constant_wave.F,
            constant_spec.F_cr,
        )


def test_stratified_bounds(mild_wave, mild_bg, mild_grid, mild_spec):
    field = reconstruct(mild_wave, mild_bg, mild_grid)
    bounds = pressure_velocity_bounds(field, mild_bg, mild_wave.F, mild_spec.F_cr)
    assert bounds.M_pressure > 0
    assert bounds.pressure_bound_min >= -1e-8
    assert bounds.velocity_bound_margin > 0


def test_diagnose(constant_report, constant_wave):
    report = constant_report
    assert report.F == constant_wave.F
    assert report.supercritical == CheckStatus.PASS
    assert report.elevation == CheckStatus.PASS
    for key in (
        "flow_force",
        "roundtrip",
        "mass_flux",
        "pressure_bound",
        "velocity_bound",
        "bernoulli_constant",
        "conjugate_flow_scan",
    ):
        assert report.status[key] == CheckStatus.PASS, key
    assert report.consistent_with_no_bores == CheckStatus.PASS


def test_diagnose_without_scan(
    constant_wave, constant_bg, constant_grid, constant_spec
):
    report = diagnose(
        constant_wave, constant_bg, constant_grid, constant_spec, conjugate=False
    )
    assert report.status["conjugate_flow_scan"] == CheckStatus.NOT_COMPUTED
    assert report.conjugate_residual is None
    assert "conjugate_flow_scan" in report.notes


def test_diagnose_needs_converged_state(constant_bg, constant_grid, constant_spec):
    state = WaveState(w=np.zeros((constant_grid.Nq + 1, constant_grid.Np + 1)), F=1.1)
    with pytest.raises(PreconditionError):
        diagnose(state, constant_bg, constant_grid, constant_spec)


def test_summary_row(constant_report):
    row = summary_row(3, constant_report)
    assert row["point"] == 3
    assert row["nodal"] == "pass"
    assert row["failed"] == ";".join(constant_report.failed)


@pytest.mark.slow
def test_identity_residuals_converge_under_refinement(
    constant_wave, constant_bg, constant_grid, constant_spec, constant_config
):
    levels = [(constant_wave, constant_grid, constant_bg)] + [
        refine_grid(constant_wave, constant_bg, constant_grid, factor, constant_config)
        for factor in (2, 4)
    ]
    residuals = np.array(
        [
            [
                check_flow_force(state, bg, grid),
                crest_identity(state, bg, grid),
                froude_identity(state, bg, constant_spec, grid).residual,
            ]
            for state, grid, bg in levels
        ]
    )
    # grid spacing shrinks by 4 from the first level to the last
    orders = np.log2(residuals[0] / residuals[-1]) / 2
    assert np.all(orders >= 1.5), orders
