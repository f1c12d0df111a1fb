"""
Shooting solvers for the transversal Sturm-Liouville problems.

Both problems are integrated as first-order systems in (y, flux) with flux = y_p / H_p^3:

    Phi:  (Phi_p / H_p^3)_p - mu rho_p Phi = 0
    M:    (M_p / H_p^3)_p - mu rho_p M = -nu M / H_p

started from y(-1) = 0, y_p(-1) = 1. Every shooting call is vectorized over arrays of
mu or nu so parameter scans cost a single RK4 pass.
"""

import logging
import math
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from strata.config import settings
from strata.exceptions.model_exceptions import (
    InternalConsistencyError,
    RootNotFoundError,
    StabilityAssumptionError,
)
from strata.models.profiles import BackgroundFlow
from strata.models.spectrum import ShootingSolution, SpectrumReport
from strata.services.quadrature import rk4

log = logging.getLogger(__name__)

# samples per scan over [mu_lo, mu_max]
_SCAN_POINTS = 600


def _shoot(bg: BackgroundFlow, mu, nu=0.0) -> tuple[np.ndarray, np.ndarray]:
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    shape = np.broadcast(mu, nu).shape
    stages = (
        (bg.H_p[:-1], bg.rho_p[:-1]),
        (bg.H_p_mid, bg.rho_p_mid),
        (bg.H_p[1:], bg.rho_p[1:]),
    )

    def rhs(j, stage, y):
        h_p, rho_p = stages[stage][0][j], stages[stage][1][j]
        return np.stack([h_p**3 * y[1], (mu * rho_p - nu / h_p) * y[0]])

    y0 = np.zeros((2,) + shape)
    y0[1] = 1.0 / bg.H_p[0] ** 3
    y = rk4(rhs, y0, bg.p_nodes)
    return y[:, 0], y[:, 1]


def _top_A(bg: BackgroundFlow, mu, phi_top, flux_top):
    return -flux_top + mu * bg.rho[-1] * phi_top


def solve_phi(bg: BackgroundFlow, mu: float) -> ShootingSolution:
    if mu < 0:
        raise ValueError(f"mu must be non-negative, got {mu}")
    phi, flux = _shoot(bg, mu)
    return ShootingSolution(
        mu=mu,
        phi=phi,
        phi_p=flux * bg.H_p**3,
        A_value=float(_top_A(bg, mu, phi[-1], flux[-1])),
    )


def A_of_mu(bg: BackgroundFlow, mu) -> np.ndarray:
    phi, flux = _shoot(bg, mu)
    return _top_A(bg, np.asarray(mu, dtype=float), phi[-1], flux[-1])


def _first_root(f_values: np.ndarray, grid: np.ndarray) -> Optional[int]:
    """Index k of the first sign change between grid[k-1] and grid[k]."""
    change = np.flatnonzero(np.sign(f_values[1:]) * np.sign(f_values[:-1]) < 0)
    return int(change[0]) + 1 if change.size else None


def _scan_grid(lo: float, hi: float) -> np.ndarray:
    return np.geomspace(max(lo, 1e-6), hi, _SCAN_POINTS)


def find_mu_cr(
    bg: BackgroundFlow, mu_max: Optional[float] = None, tol: Optional[float] = None
) -> float:
    mu_max = settings.mu_max if mu_max is None else mu_max
    tol = settings.tol_root if tol is None else tol
    A0 = float(A_of_mu(bg, 0.0))
    if A0 >= 0:
        raise RootNotFoundError("A(mu) (A(0) is not negative)", mu_max)

    grid = np.concatenate([[0.0], _scan_grid(1e-3, mu_max)])
    phi, flux = _shoot(bg, grid)
    A = _top_A(bg, grid, phi[-1], flux[-1])
    k = _first_root(A, grid)
    if k is None:
        raise RootNotFoundError("A(mu)", mu_max)
    mu_cr = brentq(
        lambda m: float(A_of_mu(bg, m)), grid[k - 1], grid[k], xtol=tol, rtol=4e-16
    )
    log.info(
        f"Critical parameter mu_cr={mu_cr:.12g} (F_cr={1 / math.sqrt(mu_cr):.12g})"
    )
    return mu_cr


def _first_top_root(
    bg: BackgroundFlow, mu_cr: float, mu_max: float, which: str, tol: float
) -> float:
    grid = _scan_grid(mu_cr, mu_max)

    def top_value(mu):
        phi, flux = _shoot(bg, mu)
        return phi[-1] if which == "phi" else flux[-1]

    values = top_value(grid)
    k = _first_root(values, grid)
    if k is None:
        return math.inf
    return brentq(
        lambda m: float(top_value(m)), grid[k - 1], grid[k], xtol=tol, rtol=4e-16
    )


def find_mu_N(
    bg: BackgroundFlow,
    mu_cr: Optional[float] = None,
    mu_max: Optional[float] = None,
) -> float:
    """Smallest mu > mu_cr with Phi_p(0; mu) = 0, or inf."""
    mu_cr = find_mu_cr(bg) if mu_cr is None else mu_cr
    mu_max = settings.mu_max if mu_max is None else mu_max
    return _first_top_root(bg, mu_cr, mu_max, "flux", settings.tol_root)


def find_mu_D(
    bg: BackgroundFlow,
    mu_cr: Optional[float] = None,
    mu_max: Optional[float] = None,
) -> float:
    """Smallest mu > mu_cr with Phi(0; mu) = 0, or inf."""
    mu_cr = find_mu_cr(bg) if mu_cr is None else mu_cr
    mu_max = settings.mu_max if mu_max is None else mu_max
    return _first_top_root(bg, mu_cr, mu_max, "phi", settings.tol_root)


def _sturm_count(M: np.ndarray) -> np.ndarray:
    """Sign changes of M over p > -1, per column."""
    signs = np.sign(M[1:])
    return np.sum(signs[1:] * signs[:-1] < 0, axis=0)


def dirichlet_eigenvalues(
    bg: BackgroundFlow, mu: float, count: int, step: Optional[float] = None
) -> np.ndarray:
    """First `count` roots of M(0; nu) in nu, bracketed by Sturm counting."""
    step = settings.nu_step if step is None else step
    nu_max = (count * math.pi) ** 2 + 1e3
    while True:
        grid = np.arange(0.0, nu_max + step, step)
        M, _ = _shoot(bg, mu, grid)
        counts = _sturm_count(M)
        if counts[-1] >= count:
            break
        nu_max *= 2
        if nu_max > 1e8:
            raise RootNotFoundError("M(0; nu)", nu_max)

    def top(nu):
        return float(_shoot(bg, mu, nu)[0][-1])

    roots = []
    intervals = [
        (grid[k - 1], grid[k], counts[k] - counts[k - 1])
        for k in range(1, len(grid))
        if counts[k] > counts[k - 1]
    ]
    while intervals and len(roots) < count:
        a, b, jump = intervals.pop(0)
        if jump == 1:
            roots.append(brentq(top, a, b, xtol=settings.tol_root, rtol=4e-16))
            continue
        # ambiguous bracket, halve the step locally
        mid = 0.5 * (a + b)
        M_mid, _ = _shoot(bg, mu, np.array([a, mid, b]))
        c = _sturm_count(M_mid)
        halves = [(a, mid, c[1] - c[0]), (mid, b, c[2] - c[1])]
        intervals = [iv for iv in halves if iv[2] > 0] + intervals
    return np.array(roots[:count])


def robin_function(bg: BackgroundFlow, mu: float, nu) -> np.ndarray:
    """B(nu) = M_p(0) / M(0); has poles at the Dirichlet eigenvalues."""
    M, flux = _shoot(bg, mu, nu)
    return flux[-1] * bg.H_p[-1] ** 3 / M[-1]


def _robin_residual(bg: BackgroundFlow, mu: float, nu) -> np.ndarray:
    # pole-free form with the zeros of B(nu) - mu rho(0) H_p(0)^3
    M, flux = _shoot(bg, mu, nu)
    return -flux[-1] + mu * bg.rho[-1] * M[-1]


def lowest_robin_eigenvalue(
    bg: BackgroundFlow, mu: float, nu_D1: Optional[float] = None
) -> float:
    """nu_0(mu); positive for mu < mu_cr, where sqrt(nu_0) is the solitary decay rate."""
    if nu_D1 is None:
        nu_D1 = float(dirichlet_eigenvalues(bg, mu, 1)[0])
    a = -max(1.0, nu_D1)
    while float(_robin_residual(bg, mu, a)) >= 0:
        a *= 2
        if a < -1e8:
            raise RootNotFoundError("B(nu) below the first Dirichlet eigenvalue", a)
    return brentq(
        lambda nu: float(_robin_residual(bg, mu, nu)), a, nu_D1, xtol=1e-14, rtol=4e-16
    )


def robin_spectrum(
    bg: BackgroundFlow, mu_cr: float, J: Optional[int] = None
) -> SpectrumReport:
    J = settings.n_robin if J is None else J
    if J < 1:
        raise ValueError(f"J must be at least 1, got {J}")

    phi_cr, flux_cr = _shoot(bg, mu_cr)
    if np.any(phi_cr[1:] <= 0):
        raise StabilityAssumptionError(
            "M(p; 0) vanishes inside (-1, 0], so a Dirichlet eigenvalue is not positive"
        )
    phi_cr_p = flux_cr * bg.H_p**3
    if np.any(phi_cr_p <= 0):
        raise InternalConsistencyError("Phi_cr is not increasing in p")

    nu_D = dirichlet_eigenvalues(bg, mu_cr, J + 1)
    nu0 = lowest_robin_eigenvalue(bg, mu_cr, nu_D1=float(nu_D[0]))
    if abs(nu0) > 100 * settings.tol_root:
        raise InternalConsistencyError(f"nu_0={nu0:.3e} at mu_cr should vanish")
    nu = [0.0]
    for j in range(J):
        nu.append(
            brentq(
                lambda x: float(_robin_residual(bg, mu_cr, x)),
                nu_D[j],
                nu_D[j + 1],
                xtol=settings.tol_root,
                rtol=4e-16,
            )
        )

    mu_N = find_mu_N(bg, mu_cr)
    mu_D = find_mu_D(bg, mu_cr)
    if mu_N > mu_D:
        raise InternalConsistencyError(f"mu_N={mu_N:.6g} exceeds mu_D={mu_D:.6g}")
    if not mu_cr < mu_N:
        raise InternalConsistencyError(
            f"mu_cr={mu_cr:.6g} is not below mu_N={mu_N:.6g}"
        )
    log.info(
        f"Spectrum: mu_N={mu_N:.8g}, mu_D={mu_D:.8g}, nu_1..nu_{J}="
        f"{', '.join(f'{x:.6g}' for x in nu[1:])}"
    )
    return SpectrumReport(
        mu_cr=mu_cr,
        F_cr=1.0 / math.sqrt(mu_cr),
        mu_N=mu_N,
        mu_D=mu_D,
        phi_cr=phi_cr,
        phi_cr_p=phi_cr_p,
        nu=np.array(nu),
        nu_dirichlet=nu_D,
    )


def compute_spectrum(bg: BackgroundFlow, J: Optional[int] = None) -> SpectrumReport:
    return robin_spectrum(bg, find_mu_cr(bg), J)
