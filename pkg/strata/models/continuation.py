from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from strata.enums import TerminationReason
from strata.models.wave import StripGrid, WaveState


class Direction(BaseModel):
    """Unit tangent (w, F) under |(w, F)|^2 = dq dp sum w^2 + sigma^2 F^2."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    w: np.ndarray
    F: float

    def reversed(self) -> "Direction":
        return Direction(w=-self.w, F=-self.F)


class Monitors(BaseModel):
    model_config = ConfigDict(frozen=True)

    norm_w: float
    min_hp: float
    max_hp: float
    F: float
    F_minus_Fcr: float
    N_s: float
    amplitude: float
    flow_force_drift: float


class ContinuationPoint(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    state: WaveState
    grid: StripGrid
    s: float
    monitors: Monitors
    tangent: Optional[Direction] = None
    flags: list[str] = Field(default_factory=list)

    def summary(self, index: int) -> dict:
        m = self.monitors
        return {
            "point": index,
            "s": self.s,
            "F": m.F,
            "amplitude": m.amplitude,
            "min_hp": m.min_hp,
            "max_hp": m.max_hp,
            "N_s": m.N_s,
            "flow_force_drift": m.flow_force_drift,
            "norm_w": m.norm_w,
            "F_minus_Fcr": m.F_minus_Fcr,
            "q_max": self.grid.q_max,
            "flags": ";".join(self.flags),
        }


class CurveLog(BaseModel):
    points: list[ContinuationPoint] = Field(default_factory=list)
    termination_reason: Optional[TerminationReason] = None
    detail: Optional[str] = None

    def rows(self) -> list[dict]:
        return [point.summary(k) for k, point in enumerate(self.points)]


class ContinuationOptions(BaseModel):
    """Step control of a branch run; unset fields fall back to settings."""

    model_config = ConfigDict(frozen=True)

    epsilon: Optional[float] = Field(default=None, gt=0)
    ds_initial: Optional[float] = Field(default=None, gt=0)
    ds_min: Optional[float] = Field(default=None, gt=0)
    ds_max: Optional[float] = Field(default=None, gt=0)
    sigma: Optional[float] = Field(default=None, gt=0)
    hp_threshold: Optional[float] = Field(default=None, gt=0)
    max_points: Optional[int] = Field(default=None, ge=1)
    gate: bool = True
