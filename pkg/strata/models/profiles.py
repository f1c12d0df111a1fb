import math
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from strata.enums import DensityMode, FarfieldBC, ProfileKind


class ProfileSpec(BaseModel):
    """
    One coefficient family or a tabulated profile.

    constant: value
    linear: value + slope*s
    exponential: value*exp(rate*s)
    tanh: value - jump*tanh((s - center)/width)
    table: CSV side file at path (header row, columns coordinate,value)

    scale multiplies the evaluated profile; normalize_shear records its factor here.
    """

    model_config = ConfigDict(frozen=True)

    kind: ProfileKind
    value: Optional[float] = None
    slope: float = 0.0
    rate: float = 0.0
    jump: float = 0.0
    center: float = 0.0
    width: float = 1.0
    path: Optional[Path] = None
    scale: float = 1.0

    @model_validator(mode="after")
    def check_parameters(self):
        if self.kind == ProfileKind.TABLE:
            if self.path is None:
                raise ValueError("table profiles need a path")
        elif self.value is None:
            raise ValueError(f"{self.kind.value} profiles need a value")
        if self.kind == ProfileKind.TANH and self.width <= 0:
            raise ValueError("tanh width must be positive")
        return self


class StratifiedConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    density_mode: DensityMode = DensityMode.EULERIAN
    density_spec: ProfileSpec
    shear_spec: Optional[ProfileSpec] = None
    height_spec: Optional[ProfileSpec] = None
    gravity: float = Field(default=9.81, gt=0)
    depth: float = Field(default=1.0, gt=0)
    wave_speed: float = Field(default=1.0, gt=0)
    p_grid_size: int = Field(default=200, ge=32)
    quadrature_order: Literal[2, 4] = 4
    q_max: Optional[float] = Field(default=None, ge=10)
    dq: Optional[float] = Field(default=None, gt=0)
    farfield_bc: FarfieldBC = FarfieldBC.DIRICHLET_ZERO

    @model_validator(mode="after")
    def check_mode_sections(self):
        if self.density_mode == DensityMode.EULERIAN and self.shear_spec is None:
            raise ValueError("eulerian mode needs a [shear] section")
        semi_lagrangian = self.density_mode == DensityMode.SEMI_LAGRANGIAN
        if semi_lagrangian and self.height_spec is None:
            raise ValueError("semi_lagrangian mode needs a [height] section")
        return self


class ScaleTuple(BaseModel):
    """Dimensional scales (d, m, rho0) plus g; m is the mass flux at F=1."""

    model_config = ConfigDict(frozen=True)

    depth: float
    rho0: float
    gravity: float
    wave_speed: float

    def mass_flux(self, F: float) -> float:
        return F * math.sqrt(self.gravity * self.rho0 * self.depth**3)

    def velocity(self, F: float) -> float:
        return F * math.sqrt(self.gravity * self.depth)

    def pressure(self, F: float) -> float:
        return F**2 * self.gravity * self.rho0 * self.depth

    def dimensionless_speed(self, F: float) -> float:
        return self.wave_speed / self.velocity(F)


class BackgroundFlow(BaseModel):
    """
    Laminar upstream state on the uniform p-grid.

    Coefficients at interval midpoints (H_p_mid, rho_p_mid) feed the RK4 shooting
    solvers. beta, E and S_H depend on F only through mu = 1/F^2 and are stored
    split as kinetic + mu*gravity parts.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    p_nodes: np.ndarray
    H: np.ndarray
    H_p: np.ndarray
    H_pp: np.ndarray
    rho: np.ndarray
    rho_p: np.ndarray
    U: np.ndarray
    U_p: np.ndarray
    H_p_mid: np.ndarray
    rho_p_mid: np.ndarray
    beta_kinetic: np.ndarray
    beta_gravity: np.ndarray
    E_kinetic: np.ndarray
    E_gravity: np.ndarray
    S_H_kinetic: float
    S_H_gravity: float
    quadrature_order: int
    scales: ScaleTuple

    @property
    def Np(self) -> int:
        return len(self.p_nodes) - 1

    @property
    def dp(self) -> float:
        return 1.0 / self.Np

    def beta(self, F: float) -> np.ndarray:
        """beta(-p) at the p-nodes."""
        return self.beta_kinetic + self.beta_gravity / F**2

    def E(self, F: float) -> np.ndarray:
        return self.E_kinetic + self.E_gravity / F**2

    def S_H(self, F: float) -> float:
        return self.S_H_kinetic + self.S_H_gravity / F**2
