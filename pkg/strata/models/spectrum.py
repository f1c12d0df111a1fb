import math

import numpy as np
from pydantic import BaseModel, ConfigDict


class ShootingSolution(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mu: float
    phi: np.ndarray
    phi_p: np.ndarray
    A_value: float


class SpectrumReport(BaseModel):
    """
    Critical parameters of the transversal problem.

    mu_N and mu_D are math.inf when no root exists below mu_max; F_N and F_D are then 0.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mu_cr: float
    F_cr: float
    mu_N: float
    mu_D: float
    phi_cr: np.ndarray
    phi_cr_p: np.ndarray
    nu: np.ndarray
    nu_dirichlet: np.ndarray

    @property
    def F_N(self) -> float:
        return 0.0 if math.isinf(self.mu_N) else 1.0 / math.sqrt(self.mu_N)

    @property
    def F_D(self) -> float:
        return 0.0 if math.isinf(self.mu_D) else 1.0 / math.sqrt(self.mu_D)

    def scalars(self) -> dict:
        return {
            "mu_cr": self.mu_cr,
            "F_cr": self.F_cr,
            "mu_N": self.mu_N,
            "mu_D": self.mu_D,
            "F_N": self.F_N,
            "F_D": self.F_D,
            "nu": [float(x) for x in self.nu],
            "nu_dirichlet": [float(x) for x in self.nu_dirichlet],
        }
