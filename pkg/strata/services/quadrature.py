"""
Fixed-grid quadrature, differentiation and Runge-Kutta shared by every solver.

All routines act on uniform p-grids; order selects the trapezoid (2) or Simpson (4) rule.
"""

from typing import Callable

import numpy as np
from scipy.integrate import (
    cumulative_simpson,
    cumulative_trapezoid,
    simpson,
    trapezoid,
)


def integrate(
    values: np.ndarray, x: np.ndarray, order: int = 4, axis: int = -1
) -> float:
    if order == 4:
        return simpson(values, x=x, axis=axis)
    return trapezoid(values, x=x, axis=axis)


def cumulative(
    values: np.ndarray, x: np.ndarray, order: int = 4, axis: int = -1
) -> np.ndarray:
    """Running integral from x[0], starting at 0."""
    if order == 4:
        return cumulative_simpson(values, x=x, axis=axis, initial=0.0)
    return cumulative_trapezoid(values, x=x, axis=axis, initial=0.0)


def d_dx(values: np.ndarray, dx: float, axis: int = -1) -> np.ndarray:
    """Second-order derivative: central inside, one-sided three-point at both ends."""
    return np.gradient(values, dx, axis=axis, edge_order=2)


def rk4(
    rhs: Callable[[int, float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    nodes: np.ndarray,
) -> np.ndarray:
    """
    Classical RK4 over the given nodes.

    rhs(j, stage, y) evaluates the derivative on the interval [nodes[j], nodes[j+1]]
    at stage 0 (left node), 1 (midpoint) or 2 (right node), so coefficients can be
    tabulated at nodes and midpoints instead of interpolated.
    """
    y = np.empty((len(nodes),) + np.shape(y0))
    y[0] = y0
    for j in range(len(nodes) - 1):
        h = nodes[j + 1] - nodes[j]
        k1 = rhs(j, 0, y[j])
        k2 = rhs(j, 1, y[j] + 0.5 * h * k1)
        k3 = rhs(j, 1, y[j] + 0.5 * h * k2)
        k4 = rhs(j, 2, y[j] + h * k3)
        y[j + 1] = y[j] + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y
