from typing import Optional

from pydantic import BaseModel, Field, computed_field


class RunManifest(BaseModel):
    """
    Provenance of one run directory.

    input_digests maps the config file and its side files to sha256 hex digests;
    output_digests does the same for every file written under the run directory,
    keyed by relative path.
    """

    config: dict
    strata_version: str
    command: str
    argv: list[str] = Field(default_factory=list)
    started: str
    finished: Optional[str] = None
    config_path: Optional[str] = None
    input_digests: dict[str, str] = Field(default_factory=dict)
    output_digests: dict[str, str] = Field(default_factory=dict)
    termination_reason: Optional[str] = None

    @computed_field
    @property
    def outputs(self) -> list[str]:
        return sorted(self.output_digests)
