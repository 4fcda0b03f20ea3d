"""Assemble geometry, cameras and images from a scene configuration."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import fileio
from ..geometry.camera import PanoCamera, PerspectiveCamera
from ..geometry.depth import DepthMap, depth_to_mesh
from ..geometry.mesh import GeometryError, Sphere, TriMesh
from ..geometry.placement import place_object
from ..geometry.scene import Scene
from ..imageops.plane import ImageError, ImagePlane, load_linear
from .config import CameraConfig, ConfigError, SceneConfig


@dataclass
class BuiltScene:
    scene: Scene
    persp_cam: PerspectiveCamera
    pano_cam: PanoCamera
    clean: Optional[ImagePlane]
    transform: np.ndarray


def make_camera(cfg: CameraConfig) -> PerspectiveCamera:
    if cfg.fx is None:
        cam = PerspectiveCamera.from_fov(cfg.width, cfg.height, cfg.hfov_deg)
        fx = fy = cam.fx
    else:
        fx = cfg.fx
        fy = cfg.fy if cfg.fy is not None else cfg.fx
    cx = cfg.cx if cfg.cx is not None else (cfg.width - 1) / 2
    cy = cfg.cy if cfg.cy is not None else (cfg.height - 1) / 2
    return PerspectiveCamera(cfg.width, cfg.height, fx, fy, cx, cy)


def load_object(cfg: SceneConfig):
    if cfg.object.mesh is not None:
        v, t, n = fileio.read_obj(cfg.object.mesh)
        return TriMesh(v, t, n, tag="object")
    return Sphere(np.zeros(3), float(cfg.object.sphere_radius))


def build_scene(cfg: SceneConfig) -> BuiltScene:
    cam = make_camera(cfg.camera)
    if cfg.background.depth is None:
        raise ConfigError("background.depth is required")
    depth = DepthMap.load(cfg.background.depth, cfg.background.depth_scale)
    if depth.depth.shape != (cam.height, cam.width):
        raise ConfigError(f"depth map is {depth.width}x{depth.height}, camera is {cam.width}x{cam.height}")
    background = depth_to_mesh(depth, cam, cfg.background.discontinuity_ratio)
    obj = load_object(cfg)
    if cfg.object.transform is not None:
        m = cfg.object.transform
    else:
        up = None if cfg.placement.up is None else np.asarray(cfg.placement.up, dtype=np.float64)
        m = place_object(obj, background, cam, up=up, size=cfg.object.size,
                         angle_tolerance_deg=cfg.placement.angle_tolerance_deg,
                         max_drop=cfg.placement.max_drop)
    placed = obj.transformed(m)
    lo, hi = placed.bounds()
    pano = PanoCamera.with_height(0.5 * (lo + hi), cfg.pano_height)
    clean = None
    if cfg.background.clean_image is not None:
        clean = load_linear(cfg.background.clean_image)
        if clean.shape != (cam.height, cam.width):
            raise ImageError("clean image does not match the camera resolution")
    scene = Scene(placed, background, cfg.object.refractive_index)
    return BuiltScene(scene, cam, pano, clean, m)


__all__ = ["BuiltScene", "build_scene", "make_camera", "load_object", "GeometryError"]
