import numpy as np
import pytest

from strata.exceptions.model_exceptions import (
    DomainTruncationError,
    GuessQualityError,
)
from strata.services.small_amplitude import (
    build_guess,
    compute_constants,
    decay_length,
    froude_of_epsilon,
    kdv_profile,
    kdv_profile_derivative,
    make_grid,
    reduced_hamiltonian,
    reduced_orbit,
    required_extent,
)

from tests.conftest import EPSILON


def test_constant_density_constants(constant_consts):
    assert constant_consts.c0 == pytest.approx(1 / 3, rel=1e-10)
    assert constant_consts.c1 == pytest.approx(1.0, rel=1e-10)
    assert constant_consts.c2 == pytest.approx(1.0, rel=1e-10)


def test_mild_density_constants_positive(mild_consts):
    assert mild_consts.c0 > 0 and mild_consts.c1 > 0 and mild_consts.c2 > 0


def test_guess_ignores_eigenfunction_scale(mild_bg, mild_spec, mild_consts, mild_grid):
    doubled = mild_spec.model_copy(
        update={"phi_cr": 2 * mild_spec.phi_cr, "phi_cr_p": 2 * mild_spec.phi_cr_p}
    )
    consts = compute_constants(mild_bg, doubled)
    assert consts.c0 == pytest.approx(4 * mild_consts.c0, rel=1e-12)
    assert consts.c2 == pytest.approx(8 * mild_consts.c2, rel=1e-12)
    guess = build_guess(mild_bg, mild_spec, mild_consts, EPSILON, mild_grid)
    rescaled = build_guess(mild_bg, doubled, consts, EPSILON, mild_grid)
    assert rescaled.F == guess.F
    np.testing.assert_allclose(rescaled.w, guess.w, rtol=0, atol=1e-12)


def test_kdv_profile_solves_reduced_ode():
    Q = np.linspace(-20, 20, 4001)
    Z = kdv_profile(Q)
    Z_QQ = np.gradient(np.gradient(Z, Q), Q)
    np.testing.assert_allclose(Z_QQ[5:-5], (Z - 1.5 * Z**2)[5:-5], atol=1e-4)
    np.testing.assert_allclose(
        kdv_profile_derivative(Q)[1:-1], np.gradient(Z, Q)[1:-1], atol=1e-4
    )
    assert kdv_profile(0.0) == 1.0


def test_orbit_is_homoclinic(constant_consts):
    q = np.linspace(-40, 40, 201)
    for epsilon in (0.001, 0.01, EPSILON):
        z1, z2 = reduced_orbit(constant_consts, epsilon, q)
        np.testing.assert_allclose(
            reduced_hamiltonian(constant_consts, epsilon, z1, z2), 0.0, atol=1e-15
        )


def test_froude_of_epsilon(constant_spec):
    assert froude_of_epsilon(constant_spec, 0.0) == pytest.approx(constant_spec.F_cr)
    assert froude_of_epsilon(constant_spec, EPSILON) > constant_spec.F_cr


def test_decay_length(constant_consts):
    # classical KdV: sech^2(sqrt(3 epsilon) x / 2)
    assert decay_length(constant_consts, EPSILON) == pytest.approx(
        1 / np.sqrt(3 * EPSILON), rel=1e-9
    )


def test_guess_amplitude(constant_bg, constant_spec, constant_consts, constant_grid):
    guess = build_guess(
        constant_bg, constant_spec, constant_consts, EPSILON, constant_grid
    )
    assert guess.predicted_amplitude == pytest.approx(EPSILON, rel=1e-9)
    assert guess.F == pytest.approx((1 - EPSILON) ** -0.5, rel=1e-8)
    np.testing.assert_array_equal(guess.w[:, 0], 0.0)
    assert guess.w.shape == (constant_grid.Nq + 1, constant_grid.Np + 1)
    state = guess.as_state()
    assert not state.converged


@pytest.mark.parametrize("epsilon", [0.0, -0.01, 0.2])
def test_guess_quality(
    epsilon, constant_bg, constant_spec, constant_consts, constant_grid
):
    with pytest.raises(GuessQualityError):
        build_guess(constant_bg, constant_spec, constant_consts, epsilon, constant_grid)
    with pytest.raises(GuessQualityError):
        required_extent(constant_consts, epsilon)


def test_short_strip(constant_bg, constant_spec, constant_consts):
    grid = make_grid(constant_bg, 12.0, 0.5)
    with pytest.raises(DomainTruncationError):
        build_guess(constant_bg, constant_spec, constant_consts, EPSILON, grid)


def test_make_grid(constant_bg):
    half = make_grid(constant_bg, 20.0, 0.5)
    assert half.q_nodes[0] == 0.0
    assert half.q_max == pytest.approx(20.0)
    assert half.crest_index == 0
    full = make_grid(constant_bg, 20.0, 0.5, symmetric=False)
    assert full.q_nodes[0] == pytest.approx(-20.0)
    assert full.Nq == 2 * half.Nq
    assert full.q_nodes[full.crest_index] == 0.0


def test_required_extent(constant_consts):
    assert required_extent(constant_consts, 0.05) >= 10.0
    assert required_extent(constant_consts, 0.001) > required_extent(
        constant_consts, 0.01
    )
