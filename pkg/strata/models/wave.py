import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from strata.enums import FarfieldBC


class StripGrid(BaseModel):
    """
    Uniform grid on the truncated strip.

    symmetric grids cover the half strip [0, Q_max] with even images at q=0; the
    full-strip debug grid covers [-Q_max, Q_max] with far-field rows at both ends.
    farfield_rate is the decay rate k of the robin_decay row w_q + k w = 0.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    q_nodes: np.ndarray
    p_nodes: np.ndarray
    symmetric: bool = True
    farfield_bc: FarfieldBC = FarfieldBC.DIRICHLET_ZERO
    farfield_rate: float = 0.0

    @model_validator(mode="after")
    def check_extent(self):
        if self.q_max < 10.0:
            raise ValueError(f"Q_max={self.q_max} must be at least 10")
        if self.symmetric and self.q_nodes[0] != 0.0:
            raise ValueError("half-strip grids start at q=0")
        return self

    @property
    def Nq(self) -> int:
        return len(self.q_nodes) - 1

    @property
    def Np(self) -> int:
        return len(self.p_nodes) - 1

    @property
    def dq(self) -> float:
        return float(self.q_nodes[1] - self.q_nodes[0])

    @property
    def dp(self) -> float:
        return float(self.p_nodes[1] - self.p_nodes[0])

    @property
    def q_max(self) -> float:
        return float(self.q_nodes[-1])

    @property
    def crest_index(self) -> int:
        return 0 if self.symmetric else self.Nq // 2


class WaveState(BaseModel):
    """w on the grid, shape (Nq+1, Np+1), indexed w[i, j] = w(q_i, p_j)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    w: np.ndarray
    F: float
    converged: bool = False
    residual_norm: float = float("nan")
    iterations: int = 0


class ReducedConstants(BaseModel):
    model_config = ConfigDict(frozen=True)

    c0: float
    c1: float
    c2: float


class SmallWaveGuess(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    epsilon: float
    F: float
    w: np.ndarray
    predicted_amplitude: float

    def as_state(self) -> WaveState:
        return WaveState(w=self.w, F=self.F)
