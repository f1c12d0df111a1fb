"""
Collocation of the height equation on the truncated strip and its Newton solver.

Unknowns are w(q_i, p_j) ordered p-fastest, k = i*(Np+1) + j, so the Jacobian has
bandwidth O(Np). Row k holds the equation attached to node (i, j):

    bottom      j = 0                      w = 0
    far field   i = Nq (and i = 0 on the full strip), j < Np
                                           w = 0  or  w_q + k w = 0
    top         j = Np                     (1+h_q^2)/(2h_p^2) - 1/(2H_p(0)^2) + mu rho(0) w
    interior    otherwise                  (1+h_q^2)h_pp - 2h_q h_p h_qp + h_p^2 h_qq
                                            + [(1/(2H_p^2))_p - mu rho_p w] h_p^3

with h = H + w and mu = 1/F^2. On the half strip q=0 is not a boundary: the
interior and top equations are evaluated there with even images w(-dq, p) = w(dq, p).
"""

import logging
from typing import Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse import coo_matrix, csc_matrix
from scipy.sparse.linalg import splu

from strata.config import settings
from strata.exceptions.model_exceptions import (
    NonConvergenceError,
    PreconditionError,
    SingularJacobianError,
    StagnationError,
)
from strata.enums import FarfieldBC
from strata.models.profiles import BackgroundFlow, StratifiedConfig
from strata.models.wave import StripGrid, WaveState
from strata.services.profiles import compute_background
from strata.services.small_amplitude import make_grid

log = logging.getLogger(__name__)

# smallest damping factor tried by the line search
_MIN_DAMPING = 2.0**-12


def q_derivative(W: np.ndarray, grid: StripGrid) -> np.ndarray:
    dq = grid.dq
    D = np.empty_like(W)
    D[1:-1] = (W[2:] - W[:-2]) / (2 * dq)
    D[-1] = (3 * W[-1] - 4 * W[-2] + W[-3]) / (2 * dq)
    if grid.symmetric:
        D[0] = 0.0
    else:
        D[0] = (-3 * W[0] + 4 * W[1] - W[2]) / (2 * dq)
    return D


def qq_derivative(W: np.ndarray, grid: StripGrid) -> np.ndarray:
    dq2 = grid.dq**2
    D = np.zeros_like(W)
    D[1:-1] = (W[2:] - 2 * W[1:-1] + W[:-2]) / dq2
    if grid.symmetric:
        D[0] = 2 * (W[1] - W[0]) / dq2
    return D


def _p_derivative(W: np.ndarray, dp: float) -> np.ndarray:
    return np.gradient(W, dp, axis=1, edge_order=2)


def field_derivatives(
    w: np.ndarray, bg: BackgroundFlow, grid: StripGrid
) -> tuple[np.ndarray, np.ndarray]:
    """(h_q, h_p) on every node with the solver's difference stencils."""
    return q_derivative(w, grid), bg.H_p + _p_derivative(w, grid.dp)


def _interior_rows(grid: StripGrid) -> np.ndarray:
    return np.arange(0 if grid.symmetric else 1, grid.Nq)


def _check_stagnation(h_p: np.ndarray, grid: StripGrid):
    if np.any(h_p <= 0):
        i, j = np.unravel_index(int(np.argmin(h_p)), h_p.shape)
        raise StagnationError(
            (int(i), int(j)),
            float(grid.p_nodes[j]),
            float(h_p[i, j]),
            q=float(grid.q_nodes[i]),
        )


def _interior_terms(W: np.ndarray, F: float, bg: BackgroundFlow, grid: StripGrid):
    """Local derivatives and coefficients of the interior equation."""
    I = _interior_rows(grid)
    dp = grid.dp
    Dq = q_derivative(W, grid)
    h_q = Dq[I, 1:-1]
    h_p = bg.H_p[1:-1] + (W[I, 2:] - W[I, :-2]) / (2 * dp)
    h_qq = qq_derivative(W, grid)[I, 1:-1]
    h_pp = bg.H_pp[1:-1] + (W[I, 2:] - 2 * W[I, 1:-1] + W[I, :-2]) / dp**2
    h_qp = (Dq[I, 2:] - Dq[I, :-2]) / (2 * dp)
    mu = 1.0 / F**2
    w = W[I, 1:-1]
    coef = -bg.H_pp[1:-1] / bg.H_p[1:-1] ** 3 - mu * bg.rho_p[1:-1] * w
    return I, w, h_q, h_p, h_qq, h_pp, h_qp, coef


def _top_terms(W: np.ndarray, bg: BackgroundFlow, grid: StripGrid):
    dp = grid.dp
    h_q = q_derivative(W, grid)[:, -1]
    h_p = bg.H_p[-1] + (3 * W[:, -1] - 4 * W[:, -2] + W[:, -3]) / (2 * dp)
    return h_q, h_p


def _farfield_rows(grid: StripGrid) -> list[int]:
    return [grid.Nq] if grid.symmetric else [0, grid.Nq]


def residual(state: WaveState, bg: BackgroundFlow, grid: StripGrid) -> np.ndarray:
    W = state.w
    F = state.F
    mu = 1.0 / F**2
    _check_stagnation(bg.H_p + _p_derivative(W, grid.dp), grid)

    R = np.array(W, dtype=float, copy=True)
    I, w, h_q, h_p, h_qq, h_pp, h_qp, coef = _interior_terms(W, F, bg, grid)
    R[I, 1:-1] = (
        (1 + h_q**2) * h_pp - 2 * h_q * h_p * h_qp + h_p**2 * h_qq + coef * h_p**3
    )

    if grid.farfield_bc == FarfieldBC.ROBIN_DECAY:
        dq, k = grid.dq, grid.farfield_rate
        N = grid.Nq
        R[N, :-1] = (3 * W[N, :-1] - 4 * W[N - 1, :-1] + W[N - 2, :-1]) / (
            2 * dq
        ) + k * W[N, :-1]
        if not grid.symmetric:
            R[0, :-1] = (-3 * W[0, :-1] + 4 * W[1, :-1] - W[2, :-1]) / (
                2 * dq
            ) - k * W[0, :-1]

    t_q, t_p = _top_terms(W, bg, grid)
    # z - H(0) in place of z - 1 keeps the laminar state an exact discrete solution
    R[:, -1] = (
        (1 + t_q**2) / (2 * t_p**2)
        - 1 / (2 * bg.H_p[-1] ** 2)
        + mu * bg.rho[-1] * W[:, -1]
    )
    return R.ravel()


def residual_F(state: WaveState, bg: BackgroundFlow, grid: StripGrid) -> np.ndarray:
    """Partial derivative of the residual with respect to F."""
    W = state.w
    dmu = -2.0 / state.F**3
    out = np.zeros_like(W, dtype=float)
    I, w, h_q, h_p, h_qq, h_pp, h_qp, coef = _interior_terms(W, state.F, bg, grid)
    out[I, 1:-1] = -dmu * bg.rho_p[1:-1] * w * h_p**3
    out[:, -1] = dmu * bg.rho[-1] * W[:, -1]
    return out.ravel()


class _Assembler:
    def __init__(self, grid: StripGrid):
        self.grid = grid
        self.stride = grid.Np + 1
        self.rows, self.cols, self.vals = [], [], []

    def add(self, i, j, di, dj, values):
        i, j, values = np.broadcast_arrays(
            np.asarray(i), np.asarray(j), np.asarray(values, dtype=float)
        )
        col_i = i + di
        if self.grid.symmetric:
            col_i = np.where(col_i == -1, 1, col_i)
        self.rows.append((i * self.stride + j).ravel())
        self.cols.append((col_i * self.stride + j + dj).ravel())
        self.vals.append(values.ravel())

    def matrix(self) -> csc_matrix:
        n = (self.grid.Nq + 1) * self.stride
        return coo_matrix(
            (
                np.concatenate(self.vals),
                (np.concatenate(self.rows), np.concatenate(self.cols)),
            ),
            shape=(n, n),
        ).tocsc()


def jacobian(state: WaveState, bg: BackgroundFlow, grid: StripGrid) -> csc_matrix:
    W, F = state.w, state.F
    mu = 1.0 / F**2
    _check_stagnation(bg.H_p + _p_derivative(W, grid.dp), grid)
    dq, dp = grid.dq, grid.dp
    Nq, Np = grid.Nq, grid.Np
    A = _Assembler(grid)

    # interior
    I, w, h_q, h_p, h_qq, h_pp, h_qp, coef = _interior_terms(W, F, bg, grid)
    i = I[:, None]
    j = np.arange(1, Np)[None, :]
    a_q = 2 * h_q * h_pp - 2 * h_p * h_qp
    a_p = -2 * h_q * h_qp + 2 * h_p * h_qq + 3 * coef * h_p**2
    a_qq = h_p**2
    a_pp = 1 + h_q**2
    a_qp = -2 * h_q * h_p
    a_w = -mu * bg.rho_p[1:-1] * h_p**3
    A.add(i, j, 0, 0, a_w - 2 * a_pp / dp**2 - 2 * a_qq / dq**2)
    A.add(i, j, 0, 1, a_p / (2 * dp) + a_pp / dp**2)
    A.add(i, j, 0, -1, -a_p / (2 * dp) + a_pp / dp**2)
    A.add(i, j, 1, 0, a_q / (2 * dq) + a_qq / dq**2)
    A.add(i, j, -1, 0, -a_q / (2 * dq) + a_qq / dq**2)
    cross = a_qp / (4 * dq * dp)
    A.add(i, j, 1, 1, cross)
    A.add(i, j, -1, -1, cross)
    A.add(i, j, 1, -1, -cross)
    A.add(i, j, -1, 1, -cross)

    # top
    t_q, t_p = _top_terms(W, bg, grid)
    g_q = t_q / t_p**2
    g_p = -(1 + t_q**2) / t_p**3
    it = np.arange(Nq + 1)
    A.add(it, Np, 0, 0, mu * bg.rho[-1] + 3 * g_p / (2 * dp))
    A.add(it, Np, 0, -1, -4 * g_p / (2 * dp))
    A.add(it, Np, 0, -2, g_p / (2 * dp))
    inner = np.arange(0 if grid.symmetric else 1, Nq)
    A.add(inner, Np, 1, 0, g_q[inner] / (2 * dq))
    A.add(inner, Np, -1, 0, -g_q[inner] / (2 * dq))
    A.add(Nq, Np, 0, 0, 3 * g_q[Nq] / (2 * dq))
    A.add(Nq, Np, -1, 0, -4 * g_q[Nq] / (2 * dq))
    A.add(Nq, Np, -2, 0, g_q[Nq] / (2 * dq))
    if not grid.symmetric:
        A.add(0, Np, 0, 0, -3 * g_q[0] / (2 * dq))
        A.add(0, Np, 1, 0, 4 * g_q[0] / (2 * dq))
        A.add(0, Np, 2, 0, -g_q[0] / (2 * dq))

    # bottom
    A.add(inner, 0, 0, 0, 1.0)

    # far field
    jf = np.arange(Np)
    if grid.farfield_bc == FarfieldBC.ROBIN_DECAY:
        k = grid.farfield_rate
        A.add(Nq, jf, 0, 0, 3 / (2 * dq) + k)
        A.add(Nq, jf, -1, 0, -4 / (2 * dq))
        A.add(Nq, jf, -2, 0, 1 / (2 * dq))
        if not grid.symmetric:
            A.add(0, jf, 0, 0, -3 / (2 * dq) - k)
            A.add(0, jf, 1, 0, 4 / (2 * dq))
            A.add(0, jf, 2, 0, -1 / (2 * dq))
    else:
        for i_far in _farfield_rows(grid):
            A.add(i_far, jf, 0, 0, 1.0)
    return A.matrix()


def _sup(values: np.ndarray) -> float:
    return float(np.max(np.abs(values))) if values.size else 0.0


def newton_solve(
    guess: WaveState,
    bg: BackgroundFlow,
    grid: StripGrid,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> WaveState:
    tol = settings.tol_newton if tol is None else tol
    max_iter = settings.max_newton_iterations if max_iter is None else max_iter
    state = WaveState(w=np.array(guess.w, dtype=float), F=guess.F)
    R = residual(state, bg, grid)
    norm = _sup(R)
    history = [norm]
    iterations = 0
    while norm >= tol:
        if iterations >= max_iter:
            raise NonConvergenceError(history)
        try:
            lu = splu(jacobian(state, bg, grid))
        except RuntimeError as e:
            raise SingularJacobianError(str(e))
        delta = lu.solve(-R).reshape(state.w.shape)
        if not np.all(np.isfinite(delta)):
            raise SingularJacobianError("non-finite Newton update")

        damping = 1.0
        while True:
            trial = WaveState(w=state.w + damping * delta, F=state.F)
            try:
                R_trial = residual(trial, bg, grid)
                norm_trial = _sup(R_trial)
                if norm_trial < norm or damping <= _MIN_DAMPING:
                    break
            except StagnationError:
                if damping <= _MIN_DAMPING:
                    raise
            damping /= 2
        state, R, norm = trial, R_trial, norm_trial
        iterations += 1
        history.append(norm)
        log.debug(f"Newton iteration {iterations}: |R|={norm:.3e}, damping={damping:g}")

    log.info(
        f"Newton converged in {iterations} iterations, |R|={norm:.3e}, F={state.F:.10g}"
    )
    return WaveState(
        w=state.w,
        F=state.F,
        converged=True,
        residual_norm=norm,
        iterations=iterations,
    )


def refine_grid(
    state: WaveState,
    bg: BackgroundFlow,
    grid: StripGrid,
    factor: int,
    config: StratifiedConfig,
) -> tuple[WaveState, StripGrid, BackgroundFlow]:
    """Prolongs a converged wave bilinearly to a grid `factor` times finer and re-solves."""
    if not state.converged:
        raise PreconditionError("refine_grid needs a converged state")
    if factor < 1:
        raise PreconditionError(f"refinement factor must be >= 1, got {factor}")
    fine_bg = compute_background(
        config.model_copy(update={"p_grid_size": bg.Np * factor})
    )
    fine_grid = make_grid(
        fine_bg,
        grid.q_max,
        grid.dq / factor,
        symmetric=grid.symmetric,
        farfield_bc=grid.farfield_bc,
        farfield_rate=grid.farfield_rate,
    )
    interpolate = RegularGridInterpolator(
        (grid.q_nodes, grid.p_nodes), state.w, method="linear"
    )
    Q, P = np.meshgrid(fine_grid.q_nodes, fine_grid.p_nodes, indexing="ij")
    w_fine = interpolate(np.stack([Q, P], axis=-1))
    w_fine[:, 0] = 0.0
    refined = newton_solve(WaveState(w=w_fine, F=state.F), fine_bg, fine_grid)
    return refined, fine_grid, fine_bg
