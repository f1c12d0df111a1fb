import logging
import math
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from strata.config import settings
from strata.enums import DensityMode, ProfileKind
from strata.exceptions.model_exceptions import (
    DegenerateInputError,
    DomainError,
    NormalizationInconsistencyError,
    StagnantBackgroundError,
    StagnationError,
)
from strata.models.profiles import (
    BackgroundFlow,
    ProfileSpec,
    ScaleTuple,
    StratifiedConfig,
)
from strata.services.quadrature import cumulative, d_dx, integrate, rk4

log = logging.getLogger(__name__)

ProfileFunction = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]

# normalization factors closer to 1 than this are treated as exactly 1
_IDEMPOTENCE_TOL = 1e-12


def profile_function(spec: ProfileSpec, domain: tuple[float, float]) -> ProfileFunction:
    """Returns s -> (f(s), f'(s)) for a profile specification on the given domain."""
    a = spec.scale
    if spec.kind == ProfileKind.CONSTANT:
        return lambda s: (
            a * spec.value * np.ones_like(np.asarray(s, dtype=float)),
            np.zeros_like(np.asarray(s, dtype=float)),
        )
    if spec.kind == ProfileKind.LINEAR:
        return lambda s: (
            a * (spec.value + spec.slope * np.asarray(s, dtype=float)),
            a * spec.slope * np.ones_like(np.asarray(s, dtype=float)),
        )
    if spec.kind == ProfileKind.EXPONENTIAL:

        def exponential(s):
            f = a * spec.value * np.exp(spec.rate * np.asarray(s, dtype=float))
            return f, spec.rate * f

        return exponential
    if spec.kind == ProfileKind.TANH:

        def tanh(s):
            t = np.tanh((np.asarray(s, dtype=float) - spec.center) / spec.width)
            return (
                a * (spec.value - spec.jump * t),
                -a * spec.jump * (1 - t**2) / spec.width,
            )

        return tanh
    return _table_function(spec, domain)


def _table_function(spec: ProfileSpec, domain: tuple[float, float]) -> ProfileFunction:
    try:
        data = np.loadtxt(spec.path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as e:
        raise DomainError("table", f"cannot read {spec.path}: {e}")
    if data.shape[1] != 2 or data.shape[0] < 4:
        raise DomainError(
            "table", f"{spec.path} needs at least 4 rows of (coordinate, value)"
        )
    s, f = data[:, 0], data[:, 1]
    if np.any(np.diff(s) <= 0):
        raise DomainError("table", f"{spec.path} coordinates must strictly increase")
    lo, hi = domain
    slack = 1e-12 * max(1.0, abs(lo))
    if s[0] < lo - slack or s[-1] > hi + slack:
        raise DomainError(
            "table", f"{spec.path} samples leave the declared domain [{lo}, {hi}]"
        )
    if s[0] > lo + slack or s[-1] < hi - slack:
        raise DomainError("table", f"{spec.path} samples do not cover [{lo}, {hi}]")
    spline = CubicSpline(s, spec.scale * f, bc_type="not-a-knot")
    derivative = spline.derivative()
    return lambda x: (spline(x), derivative(x))


def _check_positive(name: str, values: np.ndarray, where: np.ndarray):
    bad = np.flatnonzero(values <= 0)
    if bad.size:
        raise DomainError(
            name, f"non-positive sample {values[bad[0]]:.6g} at {where[bad[0]]:.6g}"
        )


def _check_stable(slope: np.ndarray, values: np.ndarray, where: np.ndarray, dy: float):
    """Density may not increase upward; rho_y > 0 would be unstable."""
    bad = np.flatnonzero(slope > 1e-12 * np.max(np.abs(values)) / dy)
    if bad.size:
        raise DomainError(
            "density",
            f"unstable stratification, derivative {slope[bad[0]]:.3e} > 0 "
            f"at {where[bad[0]]:.6g}",
        )


def normalize_shear(config: StratifiedConfig) -> StratifiedConfig:
    """
    Rescale the relative velocity so the dimensionless mass flux is one.

    Eulerian mode enforces  int sqrt(rho) u* dy = sqrt(g rho0 d^3)  on [-d, 0];
    semi-Lagrangian mode enforces  int H_p dp = 1, which is the same statement.
    """
    n_samples = 4 * config.p_grid_size + 1
    if config.density_mode == DensityMode.EULERIAN:
        d = config.depth
        ys = np.linspace(-d, 0.0, n_samples)
        rho_f = profile_function(config.density_spec, (-d, 0.0))
        u_f = profile_function(config.shear_spec, (-d, 0.0))
        rho_s, rho_y = rho_f(ys)
        _check_positive("density", rho_s, ys)
        _check_stable(rho_y, rho_s, ys, d)
        _check_positive("shear", u_f(ys)[0], ys)
        rho0 = float(rho_f(0.0)[0])
        integral, _ = quad(
            lambda y: float(np.sqrt(rho_f(y)[0]) * u_f(y)[0]),
            -d,
            0.0,
            epsabs=0.0,
            epsrel=1e-13,
            limit=200,
        )
        target = math.sqrt(config.gravity * rho0 * d**3)
        spec, field = config.shear_spec, "shear_spec"
    else:
        ps = np.linspace(-1.0, 0.0, n_samples)
        hp_f = profile_function(config.height_spec, (-1.0, 0.0))
        rho_f = profile_function(config.density_spec, (-1.0, 0.0))
        _check_positive("density", rho_f(ps)[0], ps)
        _check_positive("height", hp_f(ps)[0], ps)
        integral, _ = quad(
            lambda p: float(hp_f(p)[0]), -1.0, 0.0, epsabs=0.0, epsrel=1e-13, limit=200
        )
        target = 1.0
        spec, field = config.height_spec, "height_spec"

    if integral == 0.0 or not math.isfinite(integral):
        raise DegenerateInputError(f"normalization integral of {field} is {integral}")
    factor = target / integral
    if abs(factor - 1.0) < _IDEMPOTENCE_TOL:
        return config
    log.debug(f"Normalizing {field} by factor {factor:.15g}")
    return config.model_copy(
        update={field: spec.model_copy(update={"scale": spec.scale * factor})}
    )


def compute_background(config: StratifiedConfig) -> BackgroundFlow:
    config = normalize_shear(config)
    Np = config.p_grid_size
    p = np.linspace(-1.0, 0.0, Np + 1)
    p_mid = 0.5 * (p[:-1] + p[1:])

    if config.density_mode == DensityMode.EULERIAN:
        d = config.depth
        rho_f = profile_function(config.density_spec, (-d, 0.0))
        u_f = profile_function(config.shear_spec, (-d, 0.0))
        rho0 = float(rho_f(0.0)[0])
        velocity = math.sqrt(config.gravity * d)

        def rho_tilde(y):
            r, r_y = rho_f(d * np.asarray(y))
            return r / rho0, d * r_y / rho0

        def g_of_y(y):
            r, _ = rho_tilde(y)
            return velocity / (np.sqrt(r) * u_f(d * np.asarray(y))[0])

        H = rk4(lambda j, stage, h: g_of_y(h - 1.0), 0.0, p)
        H_p = g_of_y(H - 1.0)
        rho, rho_y = rho_tilde(H - 1.0)
        rho_p = rho_y * H_p
        u, u_y = u_f(d * (H - 1.0))
        # H_pp = G'(y) H_p with G = 1/(sqrt(rho) U)
        H_pp = -(H_p**2) * (rho_y / (2 * rho) + d * u_y / u)

        H_mid = CubicHermiteSpline(p, H, H_p)(p_mid)
        H_p_mid = g_of_y(H_mid - 1.0)
        rho_p_mid = rho_tilde(H_mid - 1.0)[1] * H_p_mid
    else:
        rho_f = profile_function(config.density_spec, (-1.0, 0.0))
        hp_f = profile_function(config.height_spec, (-1.0, 0.0))
        rho0 = float(rho_f(0.0)[0])
        rho, rho_p = (x / rho0 for x in rho_f(p))
        H_p, H_pp = hp_f(p)
        H_p_mid = hp_f(p_mid)[0]
        rho_p_mid = rho_f(p_mid)[1] / rho0
        stages = (H_p[:-1], H_p_mid, H_p[1:])
        H = rk4(lambda j, stage, h: stages[stage][j], 0.0, p)
        if np.any(rho_p > 1e-12):
            j = int(np.argmax(rho_p))
            raise DomainError(
                "density",
                f"unstable stratification, rho_p={rho_p[j]:.3e} at p={p[j]:.6g}",
            )

    if np.any(H_p <= 0):
        raise StagnantBackgroundError(float(p[np.argmax(H_p <= 0)]))
    if abs(H[-1] - 1.0) > settings.tol_h:
        raise NormalizationInconsistencyError(float(H[-1]), settings.tol_h)

    order = config.quadrature_order
    U = 1.0 / (np.sqrt(rho) * H_p)
    U_p = -U * (rho_p / (2 * rho) + H_pp / H_p)
    beta_gravity = (H - 1.0) * rho_p
    beta_kinetic = 0.5 * U**2 * rho_p + rho * U * U_p

    # E is anchored at the surface: E(0) = rho(0) U(0)^2 / 2
    def from_surface(values):
        running = cumulative(values, p, order)
        return running - running[-1]

    E_kinetic = 0.5 * rho[-1] * U[-1] ** 2 + from_surface(beta_kinetic)
    E_gravity = from_surface(beta_gravity)
    weight = from_surface(rho * H_p)

    bg = BackgroundFlow(
        p_nodes=p,
        H=H,
        H_p=H_p,
        H_pp=H_pp,
        rho=rho,
        rho_p=rho_p,
        U=U,
        U_p=U_p,
        H_p_mid=H_p_mid,
        rho_p_mid=rho_p_mid,
        beta_kinetic=beta_kinetic,
        beta_gravity=beta_gravity,
        E_kinetic=E_kinetic,
        E_gravity=E_gravity,
        S_H_kinetic=float(integrate(1.0 / H_p, p, order)),
        S_H_gravity=float(-integrate(weight * H_p, p, order)),
        quadrature_order=order,
        scales=ScaleTuple(
            depth=config.depth,
            rho0=rho0,
            gravity=config.gravity,
            wave_speed=config.wave_speed,
        ),
    )
    log.info(
        f"Background built: Np={Np}, mode={config.density_mode.value}, "
        f"H(0)-1={H[-1] - 1.0:.2e}, min H_p={H_p.min():.6g}, "
        f"max|rho_p|={np.abs(rho_p).max():.6g}"
    )
    return bg


def flow_force(
    h_column: np.ndarray,
    F: float,
    bg: BackgroundFlow,
    h_q: Optional[np.ndarray] = None,
    h_p: Optional[np.ndarray] = None,
) -> float | np.ndarray:
    """
    Flow force of a streamline column h(q0, .) in semi-Lagrangian form.

    A 2-D h_column is a stack of columns (one per q-node, p along the last axis) and
    yields one value per column.
    """
    p = bg.p_nodes
    h_column = np.asarray(h_column, dtype=float)
    dh = np.diff(h_column, axis=-1)
    if np.any(dh <= 0):
        node = np.unravel_index(int(np.argmax(dh <= 0)), dh.shape)
        i, j = (0, node[0]) if dh.ndim == 1 else (int(node[0]), int(node[1]))
        raise StagnationError((i, j), float(p[j]), float(dh[node] / bg.dp))
    if h_p is None:
        h_p = d_dx(h_column, bg.dp, axis=-1)
    if h_q is None:
        h_q = np.zeros_like(h_column)
    mu = 1.0 / F**2
    order = bg.quadrature_order
    running = cumulative(bg.rho * bg.H_p, p, order)
    weight = running - running[-1]
    integrand = (
        (1 - h_q**2) / (2 * h_p**2)
        + 1 / (2 * bg.H_p**2)
        - mu * bg.rho * (h_column - bg.H)
        - mu * weight
    ) * h_p
    result = integrate(integrand, p, order, axis=-1)
    return float(result) if np.ndim(result) == 0 else result


def background_rows(bg: BackgroundFlow, F: float) -> list[dict]:
    beta = bg.beta(F)
    return [
        {
            "p": bg.p_nodes[j],
            "H": bg.H[j],
            "H_p": bg.H_p[j],
            "rho": bg.rho[j],
            "rho_p": bg.rho_p[j],
            "beta": beta[j],
        }
        for j in range(bg.Np + 1)
    ]
