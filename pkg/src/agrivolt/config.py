"""YAML run configuration.

Every field is validated before any computation starts; relative paths are
resolved against the config file's directory, and the special value
``bundled`` points at the sample data shipped with the package.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

import yaml

from .crop import PRESETS, CropConfigError, CropParams, SoilParams
from .optimize import AZIMUTH_BOUNDS, DISTANCE_BOUNDS, OptimizerConfig
from .pv import ModuleDatasheet
from .shading import SceneConfig
from .solar import Site


class ConfigError(ValueError):
    pass


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("agrivolt") / "data" / name))


@dataclass(frozen=True)
class SweepConfig:
    variable: str = "distance"
    start: float = 5.0
    stop: float = 20.0
    step: float = 1.0

    def values(self) -> list[float]:
        n = int(round((self.stop - self.start) / self.step)) + 1
        return [round(self.start + k * self.step, 9) for k in range(n)]


@dataclass(frozen=True)
class RunConfig:
    weather: Path
    horizon: Path | None
    output_dir: Path
    site: Site
    scene: SceneConfig
    module: ModuleDatasheet
    crops: dict
    soil: SoilParams
    optimizer: OptimizerConfig
    sweep: SweepConfig
    albedo: float = 0.2
    derate: float = 0.96
    par_ratio: float = 0.48
    per_capacity: bool = False
    distance_bucket: float = 0.1
    azimuth_bucket: float = 1.0
    sha256: str = ""
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def seed(self) -> int:
        return self.optimizer.seed


_TOP = {"weather", "horizon", "output_dir", "site", "scene", "module", "crops", "soil",
        "optimizer", "sweep", "mode"}
_MODE = {"albedo", "derate", "par_ratio", "per_capacity", "distance_bucket", "azimuth_bucket"}


def _section(raw: dict, key: str) -> dict:
    sec = raw.get(key) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"'{key}' must be a mapping")
    return sec


def _build(cls, data: dict, where: str, **extra):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**{**data, **extra})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _path(value, base: Path, bundled: str | None, where: str) -> Path | None:
    if value is None:
        return None
    if value == "bundled":
        if bundled is None:
            raise ConfigError(f"{where}: no bundled default")
        return bundled_path(bundled)
    p = Path(value)
    if not p.is_absolute():
        p = base / p
    if not p.is_file():
        raise ConfigError(f"{where}: file not found: {p}")
    return p


def parse_config(text: str, base_dir: Path = Path("."), overrides: dict | None = None) -> RunConfig:
    """Validate a YAML document. ``overrides`` may set ``seed``, ``workers``, ``output_dir``."""
    try:
        raw = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping")
    unknown = set(raw) - _TOP
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    overrides = overrides or {}

    weather = _path(raw.get("weather", "bundled"), base_dir, "sample_year.csv", "weather")
    horizon = _path(raw.get("horizon"), base_dir, "horizon.csv", "horizon")
    out = overrides.get("output_dir") or raw.get("output_dir", "out")
    out = Path(out) if Path(out).is_absolute() or "output_dir" in overrides else base_dir / out

    site_raw = _section(raw, "site")
    site = _build(Site, {"latitude": 59.5549, "longitude": 16.7585, "elevation": 30.0, **site_raw},
                  "site")
    if not -90 <= site.latitude <= 90 or not -180 <= site.longitude <= 180:
        raise ConfigError("site: latitude/longitude out of range")

    scene_raw = _section(raw, "scene")
    scene = _build(SceneConfig, scene_raw, "scene", latitude=site.latitude,
                   longitude=site.longitude)
    if not AZIMUTH_BOUNDS[0] <= scene.panel_azimuth <= AZIMUTH_BOUNDS[1]:
        raise ConfigError(f"scene.panel_azimuth must lie in {AZIMUTH_BOUNDS}")
    if not DISTANCE_BOUNDS[0] <= scene.row_distance <= DISTANCE_BOUNDS[1]:
        raise ConfigError(f"scene.row_distance must lie in {DISTANCE_BOUNDS}")

    module = _build(ModuleDatasheet, _section(raw, "module"), "module")
    soil = _build(SoilParams, _section(raw, "soil"), "soil")

    crops_raw = _section(raw, "crops")
    selection = crops_raw.get("selection", list(PRESETS))
    if not selection or not isinstance(selection, list):
        raise ConfigError("crops.selection must be a non-empty list")
    over = crops_raw.get("overrides") or {}
    if set(crops_raw) - {"selection", "overrides"}:
        raise ConfigError("crops: only 'selection' and 'overrides' are allowed")
    crops = {}
    for name in selection:
        base = PRESETS.get(name)
        data = dict(over.get(name) or {})
        try:
            if base is None:
                crops[name] = CropParams.from_mapping({"name": name, **data})
            else:
                crops[name] = CropParams.from_mapping(data, base)
        except (CropConfigError, TypeError, ValueError) as exc:
            raise ConfigError(f"crops.{name}: {exc}") from exc
    if set(over) - set(selection):
        raise ConfigError("crops.overrides names a crop that is not selected")

    opt_raw = dict(_section(raw, "optimizer"))
    for key in ("seed", "workers"):
        if overrides.get(key) is not None:
            opt_raw[key] = overrides[key]
    optimizer = _build(OptimizerConfig, opt_raw, "optimizer")
    if optimizer.crop not in crops:
        raise ConfigError(f"optimizer.crop {optimizer.crop!r} is not among the selected crops")
    if not 0 <= optimizer.seed < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")

    sweep = _build(SweepConfig, _section(raw, "sweep"), "sweep")
    if sweep.variable not in ("distance", "azimuth"):
        raise ConfigError("sweep.variable must be 'distance' or 'azimuth'")
    if sweep.step <= 0 or sweep.stop < sweep.start:
        raise ConfigError("sweep needs step > 0 and stop >= start")
    lo, hi = DISTANCE_BOUNDS if sweep.variable == "distance" else AZIMUTH_BOUNDS
    if sweep.start < lo or sweep.stop > hi:
        raise ConfigError(f"sweep range must lie in [{lo}, {hi}]")

    mode = _section(raw, "mode")
    if set(mode) - _MODE:
        raise ConfigError(f"mode: unknown keys {sorted(set(mode) - _MODE)}")
    albedo = float(mode.get("albedo", 0.2))
    derate = float(mode.get("derate", 0.96))
    par_ratio = float(mode.get("par_ratio", 0.48))
    dist_bucket = float(mode.get("distance_bucket", 0.1))
    az_bucket = float(mode.get("azimuth_bucket", 1.0))
    if not 0 <= albedo <= 1:
        raise ConfigError("mode.albedo must lie in [0, 1]")
    if not 0 < derate <= 1:
        raise ConfigError("mode.derate must lie in (0, 1]")
    if not 0 < par_ratio <= 1:
        raise ConfigError("mode.par_ratio must lie in (0, 1]")
    if dist_bucket <= 0 or az_bucket <= 0:
        raise ConfigError("mode buckets must be > 0")

    digest = hashlib.sha256(text.encode()).hexdigest()
    return RunConfig(weather, horizon, out, site, scene, module, crops, soil, optimizer, sweep,
                     albedo, derate, par_ratio, bool(mode.get("per_capacity", False)),
                     dist_bucket, az_bucket, digest, raw)


def load_config(path, overrides: dict | None = None) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return parse_config(text, p.parent, overrides)
