import io
import json
import logging
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from strata.enums import FarfieldBC
from strata.exceptions.model_exceptions import (
    InputDigestError,
    MissingArtifactError,
    RunLockedError,
)
from strata.models.continuation import ContinuationPoint, Monitors
from strata.models.manifest import RunManifest
from strata.models.wave import StripGrid, WaveState
from strata.repositories.base import RunStore, sha256

log = logging.getLogger(__name__)


def file_digest(path: Path) -> str:
    try:
        return sha256(Path(path).read_bytes())
    except FileNotFoundError:
        raise MissingArtifactError(str(path))


class RunDirectory(RunStore):
    """
    A run directory on disk:

        manifest.json
        spectrum.json, phi_cr.csv, background.csv
        points/point_0000.csv        long format q, p, w
        points/point_0000.json       F, solver and grid metadata, monitors
        curve.csv
        diagnostics/point_0000.json, diagnostics/branch_summary.csv
        eulerian/point_0000_*.csv|json
    """

    MANIFEST = "manifest.json"
    LOCK = ".lock"

    def __init__(self, path: Path):
        self.path = Path(path)

    def read_bytes(self, key: str) -> bytes:
        try:
            return (self.path / key).read_bytes()
        except FileNotFoundError:
            raise MissingArtifactError(str(self.path / key))

    def write_bytes(self, key: str, data: bytes):
        target = self.path / key
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)

    def exists(self, key: str) -> bool:
        return (self.path / key).exists()

    def keys(self, prefix: str, suffix: str) -> list[str]:
        folder = self.path / prefix
        if not folder.is_dir():
            return []
        return sorted(
            f.relative_to(self.path).as_posix()
            for f in folder.iterdir()
            if f.is_file() and f.name.endswith(suffix)
        )

    @contextmanager
    def lock(self) -> Iterator["RunDirectory"]:
        self.path.mkdir(parents=True, exist_ok=True)
        lockfile = self.path / self.LOCK
        try:
            fd = os.open(lockfile, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise RunLockedError(str(lockfile))
        try:
            os.write(fd, str(os.getpid()).encode())
            os.close(fd)
            yield self
        finally:
            lockfile.unlink(missing_ok=True)

    # manifest

    def has_manifest(self) -> bool:
        return self.exists(self.MANIFEST)

    def read_manifest(self) -> RunManifest:
        return RunManifest.model_validate_json(self.read_bytes(self.MANIFEST))

    def write_manifest(self, manifest: RunManifest):
        self.write_json(self.MANIFEST, manifest.model_dump(mode="json"))

    def verify_outputs(self, manifest: RunManifest, keys: list[str]):
        for key in keys:
            recorded = manifest.output_digests.get(key)
            if recorded is None or recorded != self.digest(key):
                raise InputDigestError(str(self.path / key))

    # wave states

    @staticmethod
    def point_key(index: int, extension: str) -> str:
        return f"points/point_{index:04d}.{extension}"

    def point_indices(self) -> list[int]:
        return [
            int(Path(key).stem.split("_")[1]) for key in self.keys("points", ".json")
        ]

    def save_point(
        self,
        index: int,
        state: WaveState,
        grid: StripGrid,
        extra: Optional[dict] = None,
    ) -> dict[str, str]:
        """Writes the CSV and JSON pair for one state; returns their digests by key."""
        q, p = np.meshgrid(grid.q_nodes, grid.p_nodes, indexing="ij")
        rows = [
            {"q": a, "p": b, "w": c}
            for a, b, c in zip(q.ravel(), p.ravel(), np.asarray(state.w).ravel())
        ]
        meta = {
            "F": state.F,
            "converged": state.converged,
            "residual_norm": state.residual_norm,
            "iterations": state.iterations,
            "q_max": grid.q_max,
            "dq": grid.dq,
            "Nq": grid.Nq,
            "Np": grid.Np,
            "symmetric": grid.symmetric,
            "farfield_bc": grid.farfield_bc.value,
            "farfield_rate": grid.farfield_rate,
        }
        meta.update(extra or {})
        csv_key, json_key = self.point_key(index, "csv"), self.point_key(index, "json")
        return {
            csv_key: self.write_csv(csv_key, rows),
            json_key: self.write_json(json_key, meta),
        }

    def load_point(self, index: int) -> tuple[WaveState, StripGrid, dict]:
        meta = json.loads(self.read_bytes(self.point_key(index, "json")))
        text = self.read_bytes(self.point_key(index, "csv")).decode()
        data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
        Nq, Np = meta["Nq"], meta["Np"]
        if data.shape != ((Nq + 1) * (Np + 1), 3):
            raise MissingArtifactError(
                f"{self.path / self.point_key(index, 'csv')} "
                f"(expected {(Nq + 1) * (Np + 1)} rows)"
            )
        grid = StripGrid(
            q_nodes=data[:: Np + 1, 0].copy(),
            p_nodes=data[: Np + 1, 1].copy(),
            symmetric=meta["symmetric"],
            farfield_bc=FarfieldBC(meta["farfield_bc"]),
            farfield_rate=meta["farfield_rate"],
        )
        state = WaveState(
            w=data[:, 2].reshape(Nq + 1, Np + 1),
            F=meta["F"],
            converged=meta["converged"],
            residual_norm=float(meta["residual_norm"]),
            iterations=meta["iterations"],
        )
        return state, grid, meta

    def save_continuation_point(
        self, index: int, point: ContinuationPoint
    ) -> dict[str, str]:
        return self.save_point(
            index,
            point.state,
            point.grid,
            {
                "s": point.s,
                "monitors": point.monitors.model_dump(),
                "flags": point.flags,
            },
        )

    def load_continuation_point(self, index: int) -> ContinuationPoint:
        state, grid, meta = self.load_point(index)
        if "monitors" not in meta:
            raise MissingArtifactError(
                f"{self.path / self.point_key(index, 'json')} (no continuation data)"
            )
        # non-finite monitors are stored as the strings "inf" and "nan"
        monitors = {k: float(v) for k, v in meta["monitors"].items()}
        return ContinuationPoint(
            state=state,
            grid=grid,
            s=meta["s"],
            monitors=Monitors(**monitors),
            flags=meta.get("flags", []),
        )
