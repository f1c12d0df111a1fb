"""
Pseudo-arclength continuation of the solitary-wave branch in (w, F).

Points are joined by a predictor along the unit tangent and a Newton corrector on the
height residual bordered by the arclength constraint

    <x - x_pred, tangent> = 0,    <a, b> = dq dp sum a_w b_w + sigma^2 a_F b_F.

The branch runs until max h_p passes hp_threshold, a stand-in for stagnation, which is
approached but never reached.
"""

import logging
import math
from typing import Callable, Optional

import numpy as np
from scipy.sparse import bmat, csc_matrix, csr_matrix
from scipy.sparse.linalg import splu

from strata.config import settings
from strata.enums import CheckStatus, FarfieldBC, TerminationReason
from strata.exceptions.model_exceptions import (
    NonConvergenceError,
    ShelfDetectedError,
    SingularJacobianError,
    StagnationError,
    StepUnderflowError,
)
from strata.models.continuation import (
    ContinuationOptions,
    ContinuationPoint,
    CurveLog,
    Direction,
    Monitors,
)
from strata.models.profiles import BackgroundFlow
from strata.models.spectrum import SpectrumReport
from strata.models.wave import ReducedConstants, StripGrid, WaveState
from strata.services.diagnostics import (
    check_flow_force,
    froude_upper_bound,
    nodal_properties,
)
from strata.services.height_solver import (
    field_derivatives,
    jacobian,
    newton_solve,
    q_derivative,
    residual,
    residual_F,
)
from strata.services.small_amplitude import (
    build_guess,
    make_grid,
    required_extent,
)
from strata.services.sturm_liouville import lowest_robin_eigenvalue

log = logging.getLogger(__name__)

_SOLVER_FAILURES = (NonConvergenceError, SingularJacobianError, StagnationError)

PointCallback = Callable[[int, ContinuationPoint], None]


def _option(opts: Optional[ContinuationOptions], name: str):
    value = getattr(opts, name, None) if opts is not None else None
    return getattr(settings, name) if value is None else value


def _pad(w: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Zero-extends w at large q to the given shape."""
    if w.shape == shape:
        return w
    out = np.zeros(shape)
    out[: w.shape[0]] = w
    return out


def inner(a: Direction, b: Direction, grid: StripGrid, sigma: float) -> float:
    return float(grid.dq * grid.dp * np.sum(a.w * b.w) + sigma**2 * a.F * b.F)


def _normalize(direction: Direction, grid: StripGrid, sigma: float) -> Direction:
    size = math.sqrt(inner(direction, direction, grid, sigma))
    return Direction(w=direction.w / size, F=direction.F / size)


def _bordered(
    state: WaveState, bg: BackgroundFlow, grid: StripGrid, row: Direction, sigma: float
) -> csc_matrix:
    J = jacobian(state, bg, grid)
    JF = residual_F(state, bg, grid)
    return bmat(
        [
            [J, csc_matrix(JF[:, None])],
            [
                csr_matrix(row.w.ravel()[None, :] * grid.dq * grid.dp),
                csr_matrix([[sigma**2 * row.F]]),
            ],
        ],
        format="csc",
    )


def tangent(
    state: WaveState,
    bg: BackgroundFlow,
    grid: StripGrid,
    previous: Optional[Direction] = None,
    sigma: Optional[float] = None,
) -> Direction:
    """
    Unit tangent to the branch at a converged state.

    Without a previous tangent the F-component is fixed first and the result is
    oriented so the crest amplitude grows. With one, the bordered system
    <tangent, previous> = 1 keeps the orientation continuous.
    """
    sigma = settings.sigma if sigma is None else sigma
    shape = state.w.shape
    try:
        if previous is None:
            lu = splu(jacobian(state, bg, grid))
            tau_w = lu.solve(-residual_F(state, bg, grid)).reshape(shape)
            direction = _normalize(Direction(w=tau_w, F=1.0), grid, sigma)
            if direction.w[grid.crest_index, -1] < 0:
                direction = direction.reversed()
        else:
            previous = Direction(w=_pad(previous.w, shape), F=previous.F)
            lu = splu(_bordered(state, bg, grid, previous, sigma))
            rhs = np.zeros(state.w.size + 1)
            rhs[-1] = 1.0
            x = lu.solve(rhs)
            direction = _normalize(
                Direction(w=x[:-1].reshape(shape), F=float(x[-1])), grid, sigma
            )
    except RuntimeError as e:
        log.warning(
            f"Singular bordered system at F={state.F:.10g}, possible branch point"
        )
        raise SingularJacobianError(f"tangent system: {e}")
    if not (np.all(np.isfinite(direction.w)) and math.isfinite(direction.F)):
        raise SingularJacobianError("non-finite tangent")
    return direction


def _correct(
    predictor: WaveState,
    direction: Direction,
    bg: BackgroundFlow,
    grid: StripGrid,
    sigma: float,
) -> WaveState:
    """Newton on the height residual bordered by the arclength constraint."""
    tol = settings.tol_newton
    w, F = np.array(predictor.w, dtype=float), predictor.F
    history = []
    for iteration in range(settings.corrector_max_iterations + 1):
        state = WaveState(w=w, F=F)
        R = residual(state, bg, grid)
        offset = Direction(w=w - predictor.w, F=F - predictor.F)
        N = inner(offset, direction, grid, sigma)
        norm = float(np.max(np.abs(R)))
        history.append(norm)
        if not math.isfinite(norm):
            break
        if norm < tol and abs(N) < tol:
            return WaveState(
                w=w, F=F, converged=True, residual_norm=norm, iterations=iteration
            )
        if iteration == settings.corrector_max_iterations:
            break
        try:
            lu = splu(_bordered(state, bg, grid, direction, sigma))
        except RuntimeError as e:
            raise SingularJacobianError(str(e))
        delta = lu.solve(-np.concatenate([R, [N]]))
        w = w + delta[:-1].reshape(w.shape)
        F = F + float(delta[-1])
    raise NonConvergenceError(history)


def _check_shelf(state: WaveState, grid: StripGrid):
    slack = 10 * settings.tol_newton
    Wq = q_derivative(state.w, grid)
    right = np.flatnonzero(grid.q_nodes > 0)
    block = Wq[right, 1:]
    if np.any(block > slack):
        i, j = np.unravel_index(int(np.argmax(block)), block.shape)
        raise ShelfDetectedError(
            float(grid.q_nodes[right[i]]),
            float(grid.p_nodes[j + 1]),
            float(block[i, j]),
        )


def _tail_fires(state: WaveState, grid: StripGrid) -> bool:
    probe = int(np.searchsorted(grid.q_nodes, grid.q_max - settings.tail_probe_offset))
    return abs(state.w[min(probe, grid.Nq), -1]) > settings.extension_tail_tol


def extend_domain(
    state: WaveState, bg: BackgroundFlow, grid: StripGrid
) -> tuple[WaveState, StripGrid]:
    """Grows Q_max by extension_length while the tail at Q_max - offset is not small."""
    while _tail_fires(state, grid):
        wider = make_grid(
            bg,
            grid.q_max + settings.extension_length,
            grid.dq,
            symmetric=grid.symmetric,
            farfield_bc=grid.farfield_bc,
            farfield_rate=grid.farfield_rate,
        )
        log.warning(f"Extending the strip from Q_max={grid.q_max:g} to {wider.q_max:g}")
        if not grid.symmetric:
            pad = (wider.Nq - grid.Nq) // 2
            w = np.zeros((wider.Nq + 1, grid.Np + 1))
            w[pad : pad + grid.Nq + 1] = state.w
        else:
            w = _pad(state.w, (wider.Nq + 1, grid.Np + 1))
        state = newton_solve(WaveState(w=w, F=state.F), bg, wider)
        grid = wider
    return state, grid


def _refresh_rate(
    state: WaveState, bg: BackgroundFlow, grid: StripGrid
) -> tuple[WaveState, StripGrid]:
    """Robin far field: updates k = sqrt(nu_0(1/F^2)) and re-converges."""
    if grid.farfield_bc != FarfieldBC.ROBIN_DECAY:
        return state, grid
    nu0 = lowest_robin_eigenvalue(bg, 1.0 / state.F**2)
    rate = math.sqrt(max(nu0, 0.0))
    if rate == grid.farfield_rate:
        return state, grid
    grid = grid.model_copy(update={"farfield_rate": rate})
    return newton_solve(state, bg, grid), grid


def monitors(
    state: WaveState, bg: BackgroundFlow, grid: StripGrid, spec: SpectrumReport
) -> Monitors:
    h_q, h_p = field_derivatives(state.w, bg, grid)
    w_p = h_p - bg.H_p
    norm_w = float(
        max(np.max(np.abs(state.w)), np.max(np.abs(h_q)), np.max(np.abs(w_p)))
    )
    min_hp = float(np.min(h_p))
    gap = state.F - spec.F_cr
    return Monitors(
        norm_w=norm_w,
        min_hp=min_hp,
        max_hp=float(np.max(h_p)),
        F=state.F,
        F_minus_Fcr=gap,
        N_s=norm_w + 1 / min_hp + state.F + (1 / gap if gap > 0 else math.inf),
        amplitude=float(state.w[grid.crest_index, -1]),
        flow_force_drift=check_flow_force(state, bg, grid),
    )


def _flags(
    state: WaveState,
    bg: BackgroundFlow,
    grid: StripGrid,
    m: Monitors,
    start: Optional[Monitors],
    gate: bool,
) -> list[str]:
    flags = []
    if m.F_minus_Fcr <= 0:
        flags.append("subcritical")
    if (
        start is not None
        and m.norm_w < 2 * start.norm_w
        and m.F_minus_Fcr < 0.5 * start.F_minus_Fcr
    ):
        flags.append("asymptotic_supercriticality")
    if gate:
        nodal, elevation = nodal_properties(state, grid)
        if elevation == CheckStatus.FAIL:
            flags.append("elevation")
        flags.extend(f"nodal_{k}" for k, v in nodal.items() if v == CheckStatus.FAIL)
        if froude_upper_bound(state, bg, grid) < 0:
            flags.append("froude_upper_bound")
    if flags:
        log.warning(f"Point at F={m.F:.10g} flagged: {', '.join(flags)}")
    return flags


def make_point(
    state: WaveState,
    bg: BackgroundFlow,
    grid: StripGrid,
    spec: SpectrumReport,
    s: float,
    previous: Optional[Direction] = None,
    start: Optional[Monitors] = None,
    opts: Optional[ContinuationOptions] = None,
) -> ContinuationPoint:
    _check_shelf(state, grid)
    m = monitors(state, bg, grid, spec)
    return ContinuationPoint(
        state=state,
        grid=grid,
        s=s,
        monitors=m,
        tangent=tangent(state, bg, grid, previous, _option(opts, "sigma")),
        flags=_flags(state, bg, grid, m, start, opts.gate if opts else True),
    )


def step(
    point: ContinuationPoint,
    ds: float,
    bg: BackgroundFlow,
    spec: SpectrumReport,
    opts: Optional[ContinuationOptions] = None,
    start: Optional[Monitors] = None,
) -> tuple[ContinuationPoint, float]:
    """
    One predictor-corrector step, halving ds on failure.

    Returns the accepted point and the step length that produced it.
    """
    sigma = _option(opts, "sigma")
    ds_min = _option(opts, "ds_min")
    grid = point.grid
    direction = point.tangent or tangent(point.state, bg, grid, sigma=sigma)
    while True:
        if ds < ds_min:
            raise StepUnderflowError(ds, ds_min)
        predictor = WaveState(
            w=point.state.w + ds * direction.w, F=point.state.F + ds * direction.F
        )
        try:
            state = _correct(predictor, direction, bg, grid, sigma)
            break
        except _SOLVER_FAILURES as e:
            log.debug(f"Corrector failed at ds={ds:.3e}: {e.message}")
            ds *= settings.ds_shrink

    state, new_grid = _refresh_rate(state, bg, grid)
    state, new_grid = extend_domain(state, bg, new_grid)
    accepted = make_point(
        state, bg, new_grid, spec, point.s + ds, direction, start, opts
    )
    m = accepted.monitors
    log.info(
        f"Step accepted: s={accepted.s:.6g}, ds={ds:.3e}, F={m.F:.10g}, "
        f"amplitude={m.amplitude:.6g}, max h_p={m.max_hp:.6g}"
    )
    return accepted, ds


def _secant(points: list[ContinuationPoint]) -> Optional[Direction]:
    if len(points) < 2:
        return None
    a, b = points[-2], points[-1]
    shape = b.state.w.shape
    return Direction(
        w=b.state.w - _pad(a.state.w, shape), F=b.state.F - a.state.F
    )


def run(
    bg: BackgroundFlow,
    spec: SpectrumReport,
    consts: ReducedConstants,
    opts: Optional[ContinuationOptions] = None,
    grid: Optional[StripGrid] = None,
    start_points: Optional[list[ContinuationPoint]] = None,
    on_point: Optional[PointCallback] = None,
) -> CurveLog:
    """
    Traces the branch from the small-amplitude wave at epsilon (or from the end of
    start_points) until a termination reason applies.
    """
    ds = _option(opts, "ds_initial")
    ds_max = _option(opts, "ds_max")
    hp_threshold = _option(opts, "hp_threshold")
    max_points = _option(opts, "max_points")
    curve = CurveLog()

    if start_points:
        curve.points = list(start_points)
        last = curve.points[-1]
        previous = _secant(curve.points)
        curve.points[-1] = last.model_copy(
            update={
                "tangent": tangent(
                    last.state, bg, last.grid, previous, _option(opts, "sigma")
                )
            }
        )
        log.info(f"Resuming from point {len(curve.points) - 1} at s={last.s:.6g}")
    else:
        epsilon = settings.eps_start
        if opts is not None and opts.epsilon is not None:
            epsilon = opts.epsilon
        if grid is None:
            grid = make_grid(bg, required_extent(consts, epsilon))
        if grid.farfield_bc == FarfieldBC.ROBIN_DECAY and grid.farfield_rate == 0.0:
            F0 = (spec.mu_cr - epsilon) ** -0.5
            grid = grid.model_copy(
                update={
                    "farfield_rate": math.sqrt(
                        max(lowest_robin_eigenvalue(bg, 1 / F0**2), 0.0)
                    )
                }
            )
        guess = build_guess(bg, spec, consts, epsilon, grid)
        try:
            state = newton_solve(guess.as_state(), bg, grid)
            state, grid = extend_domain(state, bg, grid)
            first = make_point(state, bg, grid, spec, 0.0, opts=opts)
        except _SOLVER_FAILURES as e:
            curve.termination_reason = TerminationReason.NEWTON_FAILURE
            curve.detail = e.message
            log.warning(f"Continuation could not start: {e.message}")
            return curve
        except ShelfDetectedError as e:
            curve.termination_reason = TerminationReason.SHELF_DETECTED
            curve.detail = e.message
            return curve
        curve.points.append(first)
        if on_point:
            on_point(0, first)

    start = curve.points[0].monitors
    successes = 0
    while True:
        last = curve.points[-1]
        if last.monitors.max_hp > hp_threshold:
            curve.termination_reason = TerminationReason.STAGNATION_THRESHOLD
            break
        if len(curve.points) >= max_points:
            curve.termination_reason = TerminationReason.USER_LIMIT
            break
        try:
            point, used = step(last, ds, bg, spec, opts, start)
        except StepUnderflowError as e:
            curve.termination_reason = TerminationReason.STEP_UNDERFLOW
            curve.detail = e.message
            break
        except ShelfDetectedError as e:
            curve.termination_reason = TerminationReason.SHELF_DETECTED
            curve.detail = e.message
            break
        except _SOLVER_FAILURES as e:
            # failures after an accepted corrector, during extension or rate refresh
            curve.termination_reason = TerminationReason.NEWTON_FAILURE
            curve.detail = e.message
            break
        curve.points.append(point)
        if on_point:
            on_point(len(curve.points) - 1, point)
        if used < ds:
            ds, successes = used, 0
        else:
            successes += 1
            if successes == 2:
                ds, successes = min(ds * settings.ds_grow, ds_max), 0

    log.info(
        f"Continuation stopped after {len(curve.points)} points: "
        f"{curve.termination_reason.value}"
    )
    return curve
