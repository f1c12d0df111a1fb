from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from strata.enums import CheckStatus


class ConjugateFlowCandidate(BaseModel):
    """
    A q-independent solution K of the height equation met by shooting from K(-1) = 0
    with K_p(-1) = shooting_parameter.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    K: np.ndarray
    K_p: np.ndarray
    S_K: float
    shooting_parameter: float
    top_residual: float
    flow_force_difference: float
    cubic_residual: float
    sup_difference: float
    one_signed: bool

    @property
    def trivial(self) -> bool:
        return self.sup_difference < 1e-8


class ConjugateScan(BaseModel):
    F: float
    candidates: list[ConjugateFlowCandidate]
    consistent_with_no_bores: bool
    conjugate_residual: Optional[float] = None


class DiagnosticsReport(BaseModel):
    """
    Identities, bounds and nodal properties of one converged wave.

    Scalars left as None were not computed; the reason is recorded in notes under the
    same key as the entry in status.
    """

    model_config = ConfigDict(frozen=True)

    F: float
    F_cr: float
    flow_force_drift: float
    froude_identity_residual: Optional[float] = None
    A_value: Optional[float] = None
    froude_boundary_defect: Optional[float] = None
    crest_identity_residual: float
    froude_upper_margin: float
    supercritical: CheckStatus
    elevation: CheckStatus
    nodal_flags: dict[str, CheckStatus]
    pressure_bound_min: Optional[float] = None
    velocity_bound_margin: Optional[float] = None
    gradient_bound_margin: Optional[float] = None
    M_pressure: Optional[float] = None
    C_velocity: Optional[float] = None
    E_field_norm: Optional[float] = None
    E_laminar_norm: Optional[float] = None
    conjugate_residual: Optional[float] = None
    consistent_with_no_bores: CheckStatus = CheckStatus.NOT_COMPUTED
    roundtrip_deviation: Optional[float] = None
    mass_flux_defect: Optional[float] = None
    eulerian_force_defect: Optional[float] = None
    Q_bern_mismatch: Optional[float] = None
    status: dict[str, CheckStatus] = Field(default_factory=dict)
    notes: dict[str, str] = Field(default_factory=dict)

    @property
    def failed(self) -> list[str]:
        flags = dict(self.status)
        flags.update({f"nodal_{k}": v for k, v in self.nodal_flags.items()})
        flags["supercritical"] = self.supercritical
        flags["elevation"] = self.elevation
        return sorted(k for k, v in flags.items() if v == CheckStatus.FAIL)

    @property
    def passed(self) -> bool:
        return not self.failed


class FroudeIdentity(BaseModel):
    """residual is None when the tails have not decayed; reason then says why."""

    model_config = ConfigDict(frozen=True)

    residual: Optional[float]
    A_value: float
    boundary_defect: float
    first_integral: float
    reason: Optional[str] = None


class PressureVelocityBounds(BaseModel):
    model_config = ConfigDict(frozen=True)

    M_pressure: float
    C_velocity: float
    pressure_bound_min: float
    velocity_bound_margin: float
    gradient_bound_margin: float
    E_field_norm: float
    E_laminar_norm: float
