"""YAML scene configuration."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from ..geometry.placement import (DEFAULT_ANGLE_TOLERANCE_DEG, DEFAULT_OBJECT_SIZE,
                                  MAX_DROP_BELOW_AXIS)
from ..optics import DEFAULT_MAX_EVENTS, REFRACTIVE_INDEX
from ..sync.loop import SyncConfig


class ConfigError(ValueError):
    pass


@dataclass
class ObjectConfig:
    mesh: Optional[Path] = None        # OBJ file; None with sphere_radius set means analytic sphere
    sphere_radius: Optional[float] = None
    refractive_index: float = REFRACTIVE_INDEX["glass"]
    size: Optional[float] = DEFAULT_OBJECT_SIZE
    transform: Optional[np.ndarray] = None  # explicit 4x4 world transform, skips placement


@dataclass
class BackgroundConfig:
    depth: Optional[Path] = None
    depth_scale: float = 1.0
    discontinuity_ratio: float = 3.0
    clean_image: Optional[Path] = None


@dataclass
class CameraConfig:
    width: int = 1280
    height: int = 720
    fx: Optional[float] = None
    fy: Optional[float] = None
    cx: Optional[float] = None
    cy: Optional[float] = None
    hfov_deg: float = 60.0


@dataclass
class PlacementConfig:
    up: Optional[list] = None
    angle_tolerance_deg: float = DEFAULT_ANGLE_TOLERANCE_DEG
    max_drop: float = MAX_DROP_BELOW_AXIS


@dataclass
class WarpConfig:
    max_events: int = DEFAULT_MAX_EVENTS
    restrict_refraction_to_object: bool = False


@dataclass
class SceneConfig:
    object: ObjectConfig = field(default_factory=ObjectConfig)
    background: BackgroundConfig = field(default_factory=BackgroundConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    pano_height: int = 512
    placement: PlacementConfig = field(default_factory=PlacementConfig)
    warps: WarpConfig = field(default_factory=WarpConfig)
    sync: SyncConfig = field(default_factory=SyncConfig)
    base_dir: Path = Path(".")


def _section(cls, raw, name: str, base: Path, paths=()):
    raw = dict(raw or {})
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {', '.join(sorted(unknown))}")
    for key in paths:
        if raw.get(key) is not None:
            p = Path(raw[key])
            raw[key] = p if p.is_absolute() else base / p
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}]: {exc}") from exc


def parse_config(data: dict, base_dir: Path = Path(".")) -> SceneConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    allowed = {"object", "background", "camera", "panorama", "placement", "warps", "sync"}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(sorted(unknown))}")
    obj_raw = dict(data.get("object") or {})
    if "material" in obj_raw:
        name = obj_raw.pop("material")
        if name not in REFRACTIVE_INDEX:
            raise ConfigError(f"unknown material {name!r}")
        obj_raw.setdefault("refractive_index", REFRACTIVE_INDEX[name])
    obj = _section(ObjectConfig, obj_raw, "object", base_dir, ("mesh",))
    if obj.transform is not None:
        obj.transform = np.asarray(obj.transform, dtype=np.float64)
        if obj.transform.shape != (4, 4):
            raise ConfigError("object.transform must be a 4x4 matrix")
    if obj.refractive_index < 1.0:
        raise ConfigError("refractive index must be >= 1")
    if obj.mesh is None and obj.sphere_radius is None:
        raise ConfigError("object needs a mesh path or sphere_radius")
    pano = dict(data.get("panorama") or {})
    if set(pano) - {"height"}:
        raise ConfigError("panorama accepts only 'height'")
    try:
        sync = SyncConfig(**dict(data.get("sync") or {}))
    except TypeError as exc:
        raise ConfigError(f"[sync]: {exc}") from exc
    return SceneConfig(
        object=obj,
        background=_section(BackgroundConfig, data.get("background"), "background", base_dir,
                            ("depth", "clean_image")),
        camera=_section(CameraConfig, data.get("camera"), "camera", base_dir),
        pano_height=int(pano.get("height", 512)),
        placement=_section(PlacementConfig, data.get("placement"), "placement", base_dir),
        warps=_section(WarpConfig, data.get("warps"), "warps", base_dir),
        sync=sync,
        base_dir=base_dir,
    )


def load_config(path) -> SceneConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data or {}, path.parent)
