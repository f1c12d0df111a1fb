import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from strata.config import settings
from strata.enums import CheckStatus
from strata.exceptions.model_exceptions import (
    DomainError,
    PreconditionError,
    StagnationError,
)
from strata.models.diagnostics import (
    ConjugateFlowCandidate,
    ConjugateScan,
    DiagnosticsReport,
    FroudeIdentity,
    PressureVelocityBounds,
)
from strata.models.eulerian import EulerianField
from strata.models.profiles import BackgroundFlow
from strata.models.spectrum import SpectrumReport
from strata.models.wave import StripGrid, WaveState
from strata.services.eulerian import (
    eulerian_flow_force,
    mass_flux,
    reconstruct,
    roundtrip_check,
)
from strata.services.height_solver import field_derivatives, q_derivative, qq_derivative
from strata.services.profiles import flow_force
from strata.services.quadrature import d_dx, integrate, rk4
from strata.services.sturm_liouville import solve_phi

log = logging.getLogger(__name__)

NODAL_PROPERTIES = ("hq", "hqq", "hqp", "corner_hqqp", "corner_hqq")


def _status(ok: bool) -> CheckStatus:
    return CheckStatus.PASS if ok else CheckStatus.FAIL


def _nodal_slack() -> float:
    return 10 * settings.tol_newton


def column_flow_force(
    state: WaveState, bg: BackgroundFlow, grid: StripGrid
) -> np.ndarray:
    """Semi-Lagrangian flow force of every q-column, split over settings.threads workers."""
    h = bg.H + state.w
    h_q, h_p = field_derivatives(state.w, bg, grid)
    chunks = [
        ix for ix in np.array_split(np.arange(grid.Nq + 1), settings.threads) if ix.size
    ]
    with ThreadPoolExecutor(max_workers=settings.threads) as pool:
        parts = pool.map(
            lambda ix: np.atleast_1d(flow_force(h[ix], state.F, bg, h_q[ix], h_p[ix])),
            chunks,
        )
        return np.concatenate(list(parts))


def check_flow_force(state: WaveState, bg: BackgroundFlow, grid: StripGrid) -> float:
    """max over q of |S(q) - S_H| / |S_H|"""
    S = column_flow_force(state, bg, grid)
    S_H = bg.S_H(state.F)
    return float(np.max(np.abs(S - S_H)) / abs(S_H))


def _mirror_factor(grid: StripGrid) -> float:
    return 2.0 if grid.symmetric else 1.0


def froude_identity(
    state: WaveState, bg: BackgroundFlow, spec: SpectrumReport, grid: StripGrid
) -> FroudeIdentity:
    """
    Integral identity pairing Phi(.; 1/F^2) with the wave:

        int int [H_p^3 w_q^2 + (H_p + 2h_p) w_p^2] / (2 h_p^2 H_p^3) Phi_p dp dq
            + A(1/F^2) int eta dq  =  0

    over the whole line. The half strip is mirrored. The residual is normalized by the
    first integral; the flux term left at q = Q_max is reported as boundary_defect.
    """
    mu = 1.0 / state.F**2
    solution = solve_phi(bg, mu)
    W = state.w
    p, q, order = bg.p_nodes, grid.q_nodes, bg.quadrature_order
    h_q, h_p = field_derivatives(W, bg, grid)
    w_p = h_p - bg.H_p
    H_p = bg.H_p

    integrand = (
        (H_p**3 * h_q**2 + (H_p + 2 * h_p) * w_p**2)
        / (2 * h_p**2 * H_p**3)
        * solution.phi_p
    )
    factor = _mirror_factor(grid)
    first = factor * float(integrate(integrate(integrand, p, order, axis=1), q, order))
    eta_integral = factor * float(integrate(W[:, -1], q, order))

    def flux(i):
        return float(integrate(h_q[i] / h_p[i] * solution.phi, p, order))

    if grid.symmetric:
        boundary = -2 * flux(-1)
    else:
        boundary = -(flux(-1) - flux(0))

    amplitude = float(np.max(np.abs(W)))
    if amplitude == 0.0:
        return FroudeIdentity(
            residual=0.0,
            A_value=solution.A_value,
            boundary_defect=0.0,
            first_integral=0.0,
        )
    probe = min(
        int(np.searchsorted(q, grid.q_max - settings.tail_probe_offset)), grid.Nq
    )
    tail = float(np.max(np.abs(W[probe]))) / amplitude
    if not grid.symmetric:
        far = max(int(np.searchsorted(q, -grid.q_max + settings.tail_probe_offset)), 0)
        tail = max(tail, float(np.max(np.abs(W[far]))) / amplitude)
    if tail > settings.tail_decay_tol:
        return FroudeIdentity(
            residual=None,
            A_value=solution.A_value,
            boundary_defect=boundary,
            first_integral=first,
            reason=f"tails not decayed: relative size {tail:.3e} near Q_max",
        )
    residual = abs(first + solution.A_value * eta_integral) / first
    return FroudeIdentity(
        residual=residual,
        A_value=solution.A_value,
        boundary_defect=boundary,
        first_integral=first,
    )


def crest_identity(state: WaveState, bg: BackgroundFlow, grid: StripGrid) -> float:
    """
    Relative defect of

        (1/F^2) [ int |rho_p| w^2 dp + rho(0) eta^2 ]  =  int w_p^2 / (H_p^2 h_p) dp

    on the crest column.
    """
    i = grid.crest_index
    p, order = bg.p_nodes, bg.quadrature_order
    _, h_p = field_derivatives(state.w, bg, grid)
    w = state.w[i]
    w_p = h_p[i] - bg.H_p
    lhs = (
        float(integrate(np.abs(bg.rho_p) * w**2, p, order)) + bg.rho[-1] * w[-1] ** 2
    ) / state.F**2
    rhs = float(integrate(w_p**2 / (bg.H_p**2 * h_p[i]), p, order))
    scale = max(abs(lhs), abs(rhs))
    return abs(lhs - rhs) / scale if scale > 0 else 0.0


def froude_upper_bound(state: WaveState, bg: BackgroundFlow, grid: StripGrid) -> float:
    """kappa |H_p|^2 |rho| |h_p(0, .)| - F^2, which a solution keeps non-negative."""
    _, h_p = field_derivatives(state.w, bg, grid)
    bound = (
        settings.froude_bound_constant
        * np.max(np.abs(bg.H_p)) ** 2
        * np.max(np.abs(bg.rho))
        * np.max(np.abs(h_p[grid.crest_index]))
    )
    return float(bound - state.F**2)


def nodal_properties(
    state: WaveState, grid: StripGrid
) -> tuple[dict[str, CheckStatus], CheckStatus]:
    """
    Sign conditions of a symmetric monotone wave of elevation and the elevation flag.

    Values within 10*tol_newton of zero are ignored, so exponentially small tails never
    decide a flag.
    """
    slack = _nodal_slack()
    W = np.asarray(state.w, dtype=float)
    dp = grid.dp
    crest = grid.crest_index
    right = grid.q_nodes > 0
    Wq = q_derivative(W, grid)
    Wqq = qq_derivative(W, grid)
    Wqp = d_dx(Wq, dp, axis=1)
    Wqqp = d_dx(Wqq, dp, axis=1)

    def negative(values) -> CheckStatus:
        values = np.atleast_1d(values)
        return _status(not np.any(values >= slack))

    flags = {
        "hq": negative(Wq[right, 1:]),
        "hqq": negative(Wqq[crest, 1:]),
        "hqp": negative(Wqp[right, 0]),
        "corner_hqqp": negative(Wqqp[crest, 0]),
        "corner_hqq": negative(Wqq[crest, -1]),
    }
    upper = W[:, 1:]
    elevation = _status(upper.max() > slack and not np.any(upper <= -slack))
    return flags, elevation


def _conjugate_stages(bg: BackgroundFlow):
    p = bg.p_nodes
    p_mid = 0.5 * (p[:-1] + p[1:])
    H_mid = CubicHermiteSpline(p, bg.H, bg.H_p)(p_mid)
    return (
        (bg.H[:-1], bg.H_p[:-1], bg.rho_p[:-1]),
        (H_mid, bg.H_p_mid, bg.rho_p_mid),
        (bg.H[1:], bg.H_p[1:], bg.rho_p[1:]),
    )


def _slope(V, H_p):
    with np.errstate(invalid="ignore", divide="ignore"):
        inverse = 2 * V + 1 / H_p**2
        safe = np.where(inverse > 0, inverse, 1.0)
        return np.where(inverse > 0, 1 / np.sqrt(safe), np.nan)


def shoot_conjugate(
    bg: BackgroundFlow, F: float, seeds
) -> tuple[np.ndarray, np.ndarray]:
    """
    Integrates the laminar height ODE from K(-1) = 0, K_p(-1) = seed.

    The state is (K, V) with V = 1/(2K_p^2) - 1/(2H_p^2), so V_p = -mu rho_p (K - H).
    Returns K and K_p with shape (Np+1,) + shape(seeds); NaN marks seeds whose K_p
    blows up before the surface.
    """
    seeds = np.asarray(seeds, dtype=float)
    if np.any(seeds <= 0):
        raise DomainError("K_p(-1)", f"seeds must be positive, got {seeds.min():.6g}")
    mu = 1.0 / F**2
    stages = _conjugate_stages(bg)

    def rhs(j, stage, y):
        H, H_p, rho_p = (a[j] for a in stages[stage])
        return np.stack([_slope(y[1], H_p), -mu * rho_p * (y[0] - H)])

    y0 = np.zeros((2,) + seeds.shape)
    y0[1] = 1 / (2 * seeds**2) - 1 / (2 * bg.H_p[0] ** 2)
    with np.errstate(invalid="ignore"):
        y = rk4(rhs, y0, bg.p_nodes)
    K, V = y[:, 0], y[:, 1]
    H_p = bg.H_p.reshape((-1,) + (1,) * seeds.ndim)
    return K, _slope(V, H_p)


def _top_residual(bg: BackgroundFlow, F: float, K, K_p):
    """-1/(2K_p^2) + 1/(2H_p^2) - mu rho (K - H) at p = 0."""
    return (
        -1 / (2 * K_p[-1] ** 2)
        + 1 / (2 * bg.H_p[-1] ** 2)
        - bg.rho[-1] * (K[-1] - bg.H[-1]) / F**2
    )


def _candidate(
    bg: BackgroundFlow, F: float, seed: float
) -> Optional[ConjugateFlowCandidate]:
    K, K_p = shoot_conjugate(bg, F, seed)
    if not (np.all(np.isfinite(K_p)) and np.all(K_p > 0)):
        return None
    try:
        S_K = flow_force(K, F, bg, h_p=K_p)
    except StagnationError:
        return None
    order = bg.quadrature_order
    J = K - bg.H
    return ConjugateFlowCandidate(
        K=K,
        K_p=K_p,
        S_K=S_K,
        shooting_parameter=float(seed),
        top_residual=float(_top_residual(bg, F, K, K_p)),
        flow_force_difference=S_K - bg.S_H(F),
        cubic_residual=float(
            integrate((K_p - bg.H_p) ** 3 / (bg.H_p**2 * K_p**2), bg.p_nodes, order)
        ),
        sup_difference=float(np.max(np.abs(J))),
        one_signed=bool(np.all(J >= -1e-12) or np.all(J <= 1e-12)),
    )


def conjugate_flow_scan(
    bg: BackgroundFlow,
    F: float,
    n_seeds: Optional[int] = None,
    seeds: Optional[np.ndarray] = None,
    tol: Optional[float] = None,
) -> ConjugateScan:
    """
    Looks for laminar flows K conjugate to H (same flow force, same top condition).

    Every root of the top condition over the seed grid becomes a candidate, together
    with the exact seed H_p(-1), which reproduces H. The scan is consistent with the
    nonexistence of monotone bores when no nontrivial one-signed candidate matches
    both the flow force and the vanishing cubic integral within tol.
    """
    if not F > 0:
        raise PreconditionError(f"conjugate scan needs F > 0, got {F}")
    n_seeds = settings.conjugate_seeds if n_seeds is None else n_seeds
    tol = settings.tol_bound if tol is None else tol
    exact = float(bg.H_p[0])
    if seeds is None:
        seeds = exact * np.geomspace(0.2, 5.0, n_seeds)
    seeds = np.sort(np.asarray(seeds, dtype=float))

    K, K_p = shoot_conjugate(bg, F, seeds)
    T = _top_residual(bg, F, K, K_p)
    roots = [exact]
    for a, b, Ta, Tb in zip(seeds[:-1], seeds[1:], T[:-1], T[1:]):
        if not (np.isfinite(Ta) and np.isfinite(Tb)) or Ta * Tb > 0:
            continue

        def top(s):
            k, k_p = shoot_conjugate(bg, F, s)
            return float(_top_residual(bg, F, k, k_p))

        root = brentq(top, a, b, xtol=1e-14, rtol=4e-16)
        if abs(root - exact) > 1e-10 * exact:
            roots.append(root)
        log.debug(f"Conjugate root K_p(-1)={root:.12g} in [{a:.6g}, {b:.6g}]")

    candidates = [c for c in (_candidate(bg, F, s) for s in roots) if c is not None]
    matched = [
        c
        for c in candidates
        if not c.trivial and c.one_signed and abs(c.flow_force_difference) < tol
    ]
    bores = [c for c in matched if abs(c.cubic_residual) < tol]
    residual = min((abs(c.cubic_residual) for c in matched), default=None)
    if bores:
        log.warning(
            f"Conjugate scan at F={F:.8g} found {len(bores)} monotone candidate(s) "
            f"with matching flow force"
        )
    return ConjugateScan(
        F=F,
        candidates=candidates,
        consistent_with_no_bores=not bores,
        conjugate_residual=residual,
    )


def pressure_velocity_bounds(
    field: EulerianField, bg: BackgroundFlow, F: float, F0: float
) -> PressureVelocityBounds:
    """
    P + M psi >= 0 and (u-c)^2 + v^2 <= C for waves with F > F0.

    M = max(M1, M2) with M1 = |beta_+|/2 + U(0)^2 |rho_p| / 4 and
    M2 = |psi_y|^(1/2) |rho_p|^(1/2) / F0; C = (2M + 2/F0^2 + 2|E|) / min rho, where |E|
    is the larger of the reconstructed head and the laminar head at F0.
    """
    if field.dimensional:
        raise PreconditionError("bounds are evaluated on dimensionless fields")
    rho_p_norm = float(np.max(np.abs(bg.rho_p)))
    beta_plus = float(np.max(np.clip(bg.beta(F), 0.0, None)))
    M1 = 0.5 * beta_plus + 0.25 * bg.U[-1] ** 2 * rho_p_norm
    psi_y = -np.sqrt(field.rho) * field.u_rel
    M2 = math.sqrt(float(np.max(psi_y)) * rho_p_norm) / F0
    M = max(M1, M2)

    E_field = float(np.max(np.abs(field.E)))
    E_laminar = float(np.max(np.abs(bg.E(F0))))
    C = (2 * M + 2 / F0**2 + 2 * max(E_field, E_laminar)) / float(np.min(bg.rho))

    h_p = -1 / (np.sqrt(field.rho) * field.u_rel)
    h_q = field.v / field.u_rel
    return PressureVelocityBounds(
        M_pressure=M,
        C_velocity=C,
        pressure_bound_min=float(np.min(field.P + M * field.psi)),
        velocity_bound_margin=float(C - np.max(field.speed_squared)),
        gradient_bound_margin=float(np.min(np.sqrt(C * field.rho) * h_p - np.abs(h_q))),
        E_field_norm=E_field,
        E_laminar_norm=E_laminar,
    )


def diagnose(
    state: WaveState,
    bg: BackgroundFlow,
    grid: StripGrid,
    spec: SpectrumReport,
    conjugate: bool = True,
) -> DiagnosticsReport:
    if not state.converged:
        raise PreconditionError("diagnostics need a converged state")
    F = state.F
    status: dict[str, CheckStatus] = {}
    notes: dict[str, str] = {}

    S = column_flow_force(state, bg, grid)
    S_H = bg.S_H(F)
    drift = float(np.max(np.abs(S - S_H)) / abs(S_H))
    status["flow_force"] = _status(drift < settings.tol_ff)

    identity = froude_identity(state, bg, spec, grid)
    if identity.residual is None:
        status["froude_identity"] = CheckStatus.NOT_COMPUTED
        notes["froude_identity"] = identity.reason
    else:
        status["froude_identity"] = _status(identity.residual < settings.tol_id)

    crest = crest_identity(state, bg, grid)
    status["crest_identity"] = _status(crest < settings.tol_id)
    upper = froude_upper_bound(state, bg, grid)
    status["froude_upper_bound"] = _status(upper >= 0)
    nodal, elevation = nodal_properties(state, grid)

    field = reconstruct(state, bg, grid)
    bounds = pressure_velocity_bounds(field, bg, F, spec.F_cr)
    status["pressure_bound"] = _status(bounds.pressure_bound_min >= -settings.tol_bound)
    status["velocity_bound"] = _status(bounds.velocity_bound_margin >= 0)
    status["gradient_bound"] = _status(bounds.gradient_bound_margin >= 0)

    roundtrip = roundtrip_check(field, bg)
    status["roundtrip"] = _status(roundtrip < settings.tol_roundtrip)
    flux_defect = float(np.max(np.abs(mass_flux(field) - 1.0)))
    status["mass_flux"] = _status(flux_defect < settings.tol_mass)
    force_defect = float(np.max(np.abs(eulerian_flow_force(field) - S)) / abs(S_H))
    status["eulerian_flow_force"] = _status(force_defect < settings.tol_eulerian_force)
    status["bernoulli_constant"] = _status(
        field.Q_bern_mismatch < 10 * settings.tol_newton
    )

    scan = None
    if conjugate:
        scan = conjugate_flow_scan(bg, F)
        no_bores = _status(scan.consistent_with_no_bores)
    else:
        no_bores = CheckStatus.NOT_COMPUTED
        notes["conjugate_flow_scan"] = "scan skipped"
    status["conjugate_flow_scan"] = no_bores

    report = DiagnosticsReport(
        F=F,
        F_cr=spec.F_cr,
        flow_force_drift=drift,
        froude_identity_residual=identity.residual,
        A_value=identity.A_value,
        froude_boundary_defect=identity.boundary_defect,
        crest_identity_residual=crest,
        froude_upper_margin=upper,
        supercritical=_status(F > spec.F_cr),
        elevation=elevation,
        nodal_flags=nodal,
        pressure_bound_min=bounds.pressure_bound_min,
        velocity_bound_margin=bounds.velocity_bound_margin,
        gradient_bound_margin=bounds.gradient_bound_margin,
        M_pressure=bounds.M_pressure,
        C_velocity=bounds.C_velocity,
        E_field_norm=bounds.E_field_norm,
        E_laminar_norm=bounds.E_laminar_norm,
        conjugate_residual=scan.conjugate_residual if scan else None,
        consistent_with_no_bores=no_bores,
        roundtrip_deviation=roundtrip,
        mass_flux_defect=flux_defect,
        eulerian_force_defect=force_defect,
        Q_bern_mismatch=field.Q_bern_mismatch,
        status=status,
        notes=notes,
    )
    if report.failed:
        log.warning(f"Diagnostics at F={F:.10g} failed: {', '.join(report.failed)}")
    else:
        log.info(f"Diagnostics at F={F:.10g} passed")
    return report


def summary_row(index: int, report: DiagnosticsReport) -> dict:
    """One line of the branch summary."""
    return {
        "point": index,
        "F": report.F,
        "flow_force_drift": report.flow_force_drift,
        "froude_identity_residual": report.froude_identity_residual,
        "crest_identity_residual": report.crest_identity_residual,
        "froude_upper_margin": report.froude_upper_margin,
        "pressure_bound_min": report.pressure_bound_min,
        "velocity_bound_margin": report.velocity_bound_margin,
        "supercritical": report.supercritical.value,
        "elevation": report.elevation.value,
        "nodal": "pass" if all(
            v == CheckStatus.PASS for v in report.nodal_flags.values()
        ) else "fail",
        "failed": ";".join(report.failed),
    }
