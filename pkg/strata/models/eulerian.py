import numpy as np
from pydantic import BaseModel, ConfigDict

from strata.models.profiles import ScaleTuple


class EulerianField(BaseModel):
    """
    Physical-plane fields sampled on the streamline grid.

    Every 2-D array has shape (Nq+1, Np+1) and is indexed [i, j] = (x_i, p_j), so row j
    of the transpose is one streamline. u_rel = u - c is the velocity relative to the
    wave; wave_speed is c in the same units as u. displacement is w and laminar_slope
    is H_p, so the streamline slope dy/dp is laminar_slope + D(displacement) with D the
    second-order p-difference the solver uses.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    x_nodes: np.ndarray
    p_nodes: np.ndarray
    streamline_y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    u_rel: np.ndarray
    rho: np.ndarray
    psi: np.ndarray
    P: np.ndarray
    eta: np.ndarray
    displacement: np.ndarray
    laminar_slope: np.ndarray
    E: np.ndarray
    Q_bern: float
    Q_bern_upstream: float
    Q_bern_mismatch: float
    F: float
    wave_speed: float
    scales: ScaleTuple
    dimensional: bool = False

    @property
    def speed_squared(self) -> np.ndarray:
        """(u - c)^2 + v^2"""
        return self.u_rel**2 + self.v**2


class RasterField(BaseModel):
    """Fields resampled onto a regular y-grid; nodes above the surface hold NaN."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    x_nodes: np.ndarray
    y_nodes: np.ndarray
    u: np.ndarray
    v: np.ndarray
    P: np.ndarray
    psi: np.ndarray
