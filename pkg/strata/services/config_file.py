import logging
from pathlib import Path

import toml
from pydantic import ValidationError

from strata.enums import ProfileKind
from strata.exceptions.model_exceptions import ConfigError
from strata.models.profiles import ProfileSpec, StratifiedConfig

log = logging.getLogger(__name__)

PROFILE_SECTIONS = {
    "density": "density_spec",
    "shear": "shear_spec",
    "height": "height_spec",
}


def load_config(path: Path) -> StratifiedConfig:
    """
    Read a TOML run configuration.

    [density], [shear] and [height] hold ProfileSpec fields; table paths are resolved
    relative to the config file. [physics] holds gravity, depth, wave_speed and
    density_mode; [grid] holds p_grid_size, quadrature_order, q_max, dq and farfield_bc.
    """
    path = Path(path)
    try:
        raw = toml.load(path)
    except FileNotFoundError:
        raise ConfigError(str(path), "file not found")
    except (OSError, toml.TomlDecodeError) as e:
        raise ConfigError(str(path), str(e))
    return config_from_dict(raw, base_dir=path.parent, source=str(path))


def config_from_dict(
    raw: dict, base_dir: Path = Path("."), source: str = "<dict>"
) -> StratifiedConfig:
    unknown = set(raw) - set(PROFILE_SECTIONS) - {"physics", "grid"}
    if unknown:
        raise ConfigError(source, f"unknown sections {sorted(unknown)}")
    fields = {}
    for section, field in PROFILE_SECTIONS.items():
        if section in raw:
            spec = dict(raw[section])
            if spec.get("kind") == ProfileKind.TABLE.value and "path" in spec:
                spec["path"] = (base_dir / spec["path"]).resolve()
            fields[field] = spec
    fields.update(raw.get("physics", {}))
    fields.update(raw.get("grid", {}))
    try:
        return StratifiedConfig.model_validate(fields)
    except ValidationError as e:
        raise ConfigError(source, str(e))


def config_snapshot(config: StratifiedConfig) -> dict:
    """JSON-ready dump of a config, as recorded in run manifests."""
    return config.model_dump(mode="json")


def side_files(config: StratifiedConfig) -> list[Path]:
    specs: list[ProfileSpec | None] = [
        config.density_spec,
        config.shear_spec,
        config.height_spec,
    ]
    return [s.path for s in specs if s is not None and s.path is not None]
