"""
Inverse Dubreil-Jacotin transform: physical-plane velocity, pressure and surface from
a height function.

With h = H + w, the change of variables gives pointwise

    u - c = -1 / (sqrt(rho) h_p),    v = h_q (u - c),    psi = -p,    y = h - 1

and the pressure follows from the Bernoulli head E(psi), which is fixed by upstream
data: P = E - rho/2 ((u-c)^2 + v^2) - mu rho (y - y_s). y_s = H(0) - 1 is the
discrete surface datum, zero to within tol_h, so P vanishes on the surface row exactly
when the top boundary condition holds.
"""

import logging

import numpy as np
from scipy.integrate import trapezoid

from strata.config import settings
from strata.exceptions.model_exceptions import StagnationError
from strata.models.eulerian import EulerianField, RasterField
from strata.models.profiles import BackgroundFlow
from strata.models.wave import StripGrid, WaveState
from strata.services.height_solver import field_derivatives
from strata.services.quadrature import d_dx

log = logging.getLogger(__name__)


def reconstruct(state: WaveState, bg: BackgroundFlow, grid: StripGrid) -> EulerianField:
    W = np.asarray(state.w, dtype=float)
    F = state.F
    mu = 1.0 / F**2
    h_q, h_p = field_derivatives(W, bg, grid)
    if np.any(h_p <= 0):
        i, j = np.unravel_index(int(np.argmin(h_p)), h_p.shape)
        raise StagnationError(
            (int(i), int(j)),
            float(grid.p_nodes[j]),
            float(h_p[i, j]),
            q=float(grid.q_nodes[i]),
        )

    shape = W.shape
    rho = np.broadcast_to(bg.rho, shape).copy()
    c = bg.scales.dimensionless_speed(F)
    u_rel = -1.0 / (np.sqrt(rho) * h_p)
    v = h_q * u_rel
    y = bg.H + W - 1.0
    datum = bg.H[-1] - 1.0
    E = np.broadcast_to(bg.E(F), shape).copy()
    P = E - 0.5 * rho * (u_rel**2 + v**2) - mu * rho * (y - datum)

    rho0 = bg.rho[-1]
    eta = W[:, -1].copy()
    surface_speed2 = u_rel[:, -1] ** 2 + v[:, -1] ** 2
    Q_surface = rho0 * surface_speed2 + 2 * mu * rho0 * (eta + 1.0)
    Q_upstream = float(rho0 * bg.U[-1] ** 2 + 2 * mu * rho0)
    mismatch = float(np.max(np.abs(Q_surface - Q_upstream)))
    if mismatch > 10 * settings.tol_newton:
        log.warning(
            f"Bernoulli constant mismatch {mismatch:.3e} between surface and upstream"
        )

    return EulerianField(
        x_nodes=grid.q_nodes.copy(),
        p_nodes=grid.p_nodes.copy(),
        streamline_y=y,
        u=c + u_rel,
        v=v,
        u_rel=u_rel,
        rho=rho,
        psi=np.broadcast_to(-grid.p_nodes, shape).copy(),
        P=P,
        eta=eta,
        displacement=W.copy(),
        laminar_slope=bg.H_p.copy(),
        E=E,
        Q_bern=float(Q_surface[grid.crest_index]),
        Q_bern_upstream=Q_upstream,
        Q_bern_mismatch=mismatch,
        F=F,
        wave_speed=c,
        scales=bg.scales,
    )


def _difference_matrix(n: int, dp: float) -> np.ndarray:
    """Dense matrix of the second-order p-difference, one column per unit vector."""
    return d_dx(np.eye(n), dp, axis=0)


def roundtrip_check(field: EulerianField, bg: BackgroundFlow) -> float:
    """
    Recovers the streamlines from (u, rho) alone and returns the sup deviation from
    field.streamline_y.

    h_p is rebuilt from the velocity, the laminar slope removed, and the p-difference
    operator inverted in least squares with w(-1) = 0 appended as an extra row.
    """
    h_p = 1.0 / (np.sqrt(field.rho) * (field.wave_speed - field.u))
    n = len(field.p_nodes)
    dp = float(field.p_nodes[1] - field.p_nodes[0])
    D = _difference_matrix(n, dp)
    bed = np.zeros((1, n))
    bed[0, 0] = 1.0
    system = np.vstack([D, bed])
    rhs = np.vstack([(h_p - field.laminar_slope).T, np.zeros((1, h_p.shape[0]))])
    w, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    y = bg.H + w.T - 1.0
    return float(np.max(np.abs(y - field.streamline_y)))


def eulerian_flow_force(field: EulerianField) -> np.ndarray:
    """S(x) = int (P + rho (u-c)^2) dy from the bed to the surface, per column."""
    return trapezoid(field.P + field.rho * field.u_rel**2, field.streamline_y, axis=1)


def mass_flux(field: EulerianField) -> np.ndarray:
    """int sqrt(rho) (c - u) dy per column; one in dimensionless units."""
    dp = float(field.p_nodes[1] - field.p_nodes[0])
    slope = field.laminar_slope + d_dx(field.displacement, dp, axis=1)
    integrand = np.sqrt(field.rho) * (field.wave_speed - field.u) * slope
    return trapezoid(integrand, field.p_nodes, axis=1)


def to_dimensional(field: EulerianField, bg: BackgroundFlow, F: float) -> EulerianField:
    if field.dimensional:
        return field
    s = bg.scales
    d = s.depth
    velocity = s.velocity(F)
    pressure = s.pressure(F)
    return field.model_copy(
        update={
            "x_nodes": field.x_nodes * d,
            "streamline_y": field.streamline_y * d,
            "u": field.u * velocity,
            "v": field.v * velocity,
            "u_rel": field.u_rel * velocity,
            "rho": field.rho * s.rho0,
            "psi": field.psi * s.mass_flux(F),
            "P": field.P * pressure,
            "E": field.E * pressure,
            "eta": field.eta * d,
            "displacement": field.displacement * d,
            "laminar_slope": field.laminar_slope * d,
            "Q_bern": field.Q_bern * pressure,
            "Q_bern_upstream": field.Q_bern_upstream * pressure,
            "Q_bern_mismatch": field.Q_bern_mismatch * pressure,
            "wave_speed": field.wave_speed * velocity,
            "dimensional": True,
        }
    )


def raster(field: EulerianField, ny: int) -> RasterField:
    if ny < 2:
        raise ValueError(f"raster needs at least 2 rows, got {ny}")
    y_bed = float(field.streamline_y[:, 0].min())
    y_top = float(field.streamline_y[:, -1].max())
    y_nodes = np.linspace(y_bed, y_top, ny)
    shape = (len(field.x_nodes), ny)
    out = {name: np.full(shape, np.nan) for name in ("u", "v", "P", "psi")}
    for i in range(len(field.x_nodes)):
        column = field.streamline_y[i]
        for name in out:
            out[name][i] = np.interp(
                y_nodes, column, getattr(field, name)[i], left=np.nan, right=np.nan
            )
    return RasterField(x_nodes=field.x_nodes, y_nodes=y_nodes, **out)


def field_rows(field: EulerianField) -> list[dict]:
    """Long format, one row per (x, p) node."""
    return [
        {
            "x": field.x_nodes[i],
            "y": field.streamline_y[i, j],
            "u": field.u[i, j],
            "v": field.v[i, j],
            "P": field.P[i, j],
            "psi": field.psi[i, j],
        }
        for i in range(len(field.x_nodes))
        for j in range(len(field.p_nodes))
    ]


def surface_rows(field: EulerianField) -> list[dict]:
    return [{"x": x, "eta": eta} for x, eta in zip(field.x_nodes, field.eta)]


def raster_rows(grid: RasterField) -> list[dict]:
    return [
        {
            "x": grid.x_nodes[i],
            "y": grid.y_nodes[k],
            "u": grid.u[i, k],
            "v": grid.v[i, k],
            "P": grid.P[i, k],
            "psi": grid.psi[i, k],
        }
        for i in range(len(grid.x_nodes))
        for k in range(len(grid.y_nodes))
    ]


def sidecar(field: EulerianField) -> dict:
    return {
        "F": field.F,
        "Q_bern": field.Q_bern,
        "Q_bern_upstream": field.Q_bern_upstream,
        "Q_bern_mismatch": field.Q_bern_mismatch,
        "wave_speed": field.wave_speed,
        "dimensional": field.dimensional,
        "scales": field.scales.model_dump(),
    }
