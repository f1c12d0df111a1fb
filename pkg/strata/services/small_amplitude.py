import logging
import math
from typing import Optional

import numpy as np

from strata.config import settings
from strata.enums import FarfieldBC
from strata.exceptions.model_exceptions import (
    DomainTruncationError,
    GuessQualityError,
    StratificationAssumptionError,
)
from strata.models.profiles import BackgroundFlow
from strata.models.spectrum import SpectrumReport
from strata.models.wave import ReducedConstants, SmallWaveGuess, StripGrid
from strata.services.quadrature import integrate

log = logging.getLogger(__name__)


def compute_constants(bg: BackgroundFlow, spec: SpectrumReport) -> ReducedConstants:
    p, order = bg.p_nodes, bg.quadrature_order
    phi, phi_p = spec.phi_cr, spec.phi_cr_p
    c0 = float(integrate(phi**2 / bg.H_p, p, order))
    c1 = float(bg.rho[-1] * phi[-1] ** 2 - integrate(bg.rho_p * phi**2, p, order))
    c2 = float(integrate(phi_p**3 / bg.H_p**4, p, order))
    for name, value in (("c0", c0), ("c1", c1), ("c2", c2)):
        if not value > 0:
            raise StratificationAssumptionError(name, value)
    log.info(f"Reduced constants c0={c0:.10g}, c1={c1:.10g}, c2={c2:.10g}")
    return ReducedConstants(c0=c0, c1=c1, c2=c2)


def kdv_profile(Q):
    """sech^2(Q/2), the homoclinic orbit of Z'' = Z - 3/2 Z^2."""
    return 1.0 / np.cosh(0.5 * np.asarray(Q, dtype=float)) ** 2


def kdv_profile_derivative(Q):
    Q = np.asarray(Q, dtype=float)
    return -np.tanh(0.5 * Q) * kdv_profile(Q)


def decay_length(consts: ReducedConstants, epsilon: float) -> float:
    return (epsilon * consts.c1 / consts.c0) ** -0.5


def froude_of_epsilon(spec: SpectrumReport, epsilon: float) -> float:
    return (spec.mu_cr - epsilon) ** -0.5


def reduced_hamiltonian(consts: ReducedConstants, epsilon: float, z1, z2):
    """Leading-order energy of the planar reduced system; the homoclinic has K = 0."""
    c0, c1, c2 = consts.c0, consts.c1, consts.c2
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    return 0.5 * z2**2 - 0.5 * epsilon * c1 / c0 * z1**2 + 0.5 * c0**-1.5 * c2 * z1**3


def reduced_orbit(
    consts: ReducedConstants, epsilon: float, q
) -> tuple[np.ndarray, np.ndarray]:
    """(z1, z1_q) along the leading-order homoclinic."""
    c0, c1, c2 = consts.c0, consts.c1, consts.c2
    amplitude = epsilon * c0**0.5 * c1 / c2
    rate = epsilon**0.5 * c0**-0.5 * c1**0.5
    Q = rate * np.asarray(q, dtype=float)
    return amplitude * kdv_profile(Q), amplitude * rate * kdv_profile_derivative(Q)


def make_grid(
    bg: BackgroundFlow,
    q_max: float,
    dq: Optional[float] = None,
    symmetric: bool = True,
    farfield_bc: FarfieldBC = FarfieldBC.DIRICHLET_ZERO,
    farfield_rate: float = 0.0,
) -> StripGrid:
    dq = settings.dq if dq is None else dq
    Nq = int(math.ceil(q_max / dq - 1e-9))
    half = np.linspace(0.0, Nq * dq, Nq + 1)
    q = half if symmetric else np.concatenate([-half[:0:-1], half])
    return StripGrid(
        q_nodes=q,
        p_nodes=bg.p_nodes,
        symmetric=symmetric,
        farfield_bc=farfield_bc,
        farfield_rate=farfield_rate,
    )


def required_extent(consts: ReducedConstants, epsilon: float) -> float:
    if not 0 < epsilon <= settings.eps_guess_max:
        raise GuessQualityError(epsilon, settings.eps_guess_max)
    extent = settings.decay_lengths * decay_length(consts, epsilon)
    return max(settings.q_max_min, extent)


def build_guess(
    bg: BackgroundFlow,
    spec: SpectrumReport,
    consts: ReducedConstants,
    epsilon: float,
    grid: StripGrid,
) -> SmallWaveGuess:
    if not 0 < epsilon <= settings.eps_guess_max:
        raise GuessQualityError(epsilon, settings.eps_guess_max)
    required = settings.decay_lengths * decay_length(consts, epsilon)
    if grid.q_max < required:
        raise DomainTruncationError(grid.q_max, required)

    z1, _ = reduced_orbit(consts, epsilon, grid.q_nodes)
    w = np.outer(z1, consts.c0**-0.5 * spec.phi_cr)
    w[:, 0] = 0.0
    F = froude_of_epsilon(spec, epsilon)
    amplitude = float(w[grid.crest_index, -1])
    log.info(
        f"Small-amplitude guess: epsilon={epsilon:g}, F={F:.10g}, "
        f"predicted amplitude={amplitude:.6g}"
    )
    return SmallWaveGuess(epsilon=epsilon, F=F, w=w, predicted_amplitude=amplitude)
