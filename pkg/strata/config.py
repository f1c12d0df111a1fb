import math
from os import environ
from pathlib import Path
from typing import Literal, Optional

import toml
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    log_level: Level for the "strata" logger
    log_output: "console" (stderr), "file" or "both"
    log_dir: Directory for log files when log_output is "file" or "both"
    threads: Worker count for batch diagnostics (STRATA_THREADS)
    tol_h: Relative tolerance on H(0)=1 for a computed background
    tol_root: Root tolerance for all scalar shooting problems (in mu or nu)
    tol_quadrature: Tolerance used when comparing quadratures of the same integrand
    mu_max: Scan ceiling for mu = 1/F^2
    nu_step: Initial scan step for Dirichlet poles of the Robin problem
    n_robin: Number J of Robin eigenvalues reported beyond nu_0
    eps_guess_max: Largest epsilon accepted by the small-amplitude guess
    eps_start: Epsilon of the first continuation point
    tol_newton: Sup-norm residual tolerance for Newton
    max_newton_iterations: Newton iteration cap
    q_max_min: Smallest admissible half-strip length
    decay_lengths: Number of KdV decay lengths the half-strip must cover
    dq: Default q spacing of the strip grid
    ds_initial, ds_min, ds_max, ds_grow, ds_shrink: Arclength step control
    sigma: Weight of F in the arclength metric
    hp_threshold: Stagnation proxy, continuation stops once max h_p exceeds it
    max_points: Default continuation point limit
    extension_tail_tol: |w(Q_max - tail_probe_offset, 0)| above which the strip grows
    extension_length: Strip growth per extension
    tail_probe_offset: Distance from Q_max at which the tail is probed
    tol_ff, tol_id, tol_bound, tol_roundtrip, tol_mass: Diagnostics pass thresholds
    tol_eulerian_force: Relative agreement of y- and p-quadratures of the flow force
    tail_decay_tol: Relative tail size below which a wave counts as decayed
    corrector_max_iterations: Newton cap inside one continuation step
    conjugate_seeds: Number of K_p(-1) seeds in the conjugate-flow scan
    froude_bound_constant: Constant in front of the Froude upper bound
    strata_version:
    """

    model_config = SettingsConfigDict(env_prefix="STRATA_")

    log_level: str = "INFO"
    log_output: Literal["console", "file", "both"] = "console"
    log_dir: Path = Path("logs")
    threads: int = 1
    tol_h: float = 1e-8
    tol_root: float = 1e-10
    tol_quadrature: float = 1e-10
    mu_max: float = 1e4
    nu_step: float = 1.0
    n_robin: int = 5
    eps_guess_max: float = 0.05
    eps_start: float = 0.005
    tol_newton: float = 1e-10
    max_newton_iterations: int = 50
    q_max_min: float = 10.0
    decay_lengths: float = 20.0
    dq: float = 0.25
    ds_initial: float = 0.02
    ds_min: float = 1e-6
    ds_max: float = 0.5
    ds_grow: float = 1.3
    ds_shrink: float = 0.5
    sigma: float = 1.0
    hp_threshold: float = 50.0
    max_points: int = 500
    extension_tail_tol: float = 1e-8
    extension_length: float = 10.0
    tail_probe_offset: float = 5.0
    tol_ff: float = 1e-4
    tol_id: float = 5e-3
    tol_bound: float = 1e-8
    tol_roundtrip: float = 1e-10
    tol_mass: float = 1e-8
    tol_eulerian_force: float = 1e-3
    tail_decay_tol: float = 1e-6
    corrector_max_iterations: int = 12
    conjugate_seeds: int = 64
    froude_bound_constant: float = 4 / math.pi
    strata_version: Optional[str] = Field(default=None, validate_default=True)

    @field_validator("threads")
    @classmethod
    def validate_threads(cls, v):
        if v < 1:
            raise ValueError(f"STRATA_THREADS must be at least 1, got {v}")
        return v

    @field_validator("strata_version")
    @classmethod
    def get_version(cls, v):
        if v:
            return v
        version = environ.get("STRATA_VERSION")
        if version:
            return version

        possible_locations = (
            # dir above /strata, present in dev environments
            Path(__file__).parent.parent,
            # _inside_ /strata, present in wheel builds
            Path(__file__).parent,
        )
        p: Path
        for p in possible_locations:
            if (p / "pyproject.toml").exists():
                return toml.load(p / "pyproject.toml")["tool"]["poetry"]["version"]
        else:
            raise RuntimeError(
                "STRATA_VERSION not set, and cannot find a pyproject.toml to extract the version."
            )


settings = Settings()
