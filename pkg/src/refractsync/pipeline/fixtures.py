"""Synthetic scenes with analytically rendered, mutually consistent targets."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .. import fileio
from ..geometry import _kernels as K
from ..geometry.camera import PanoCamera, PerspectiveCamera, pano_dirs
from ..geometry.mesh import Ray, Sphere, box_mesh, uv_sphere
from ..geometry.scene import Scene
from ..imageops.plane import ImagePlane, save_image
from ..optics import trace_refraction_path
from ..warpfield.compile import WarpBundle, compile_warps


def smooth_texture(points: np.ndarray) -> np.ndarray:
    """Low-frequency colour field on world points, values in [0.15, 0.85]."""
    x, y, z = points[..., 0], points[..., 1], points[..., 2]
    r = 0.5 + 0.35 * np.sin(0.9 * x + 0.3 * z) * np.cos(0.7 * y)
    g = 0.5 + 0.35 * np.cos(0.6 * x - 0.8 * y + 0.2 * z)
    b = 0.5 + 0.35 * np.sin(0.5 * z + 0.4 * x + 1.0) * np.cos(0.5 * y - 0.3)
    return np.stack([r, g, b], axis=-1)


@dataclass
class RenderedScene:
    scene: Scene
    persp_cam: PerspectiveCamera
    pano_cam: PanoCamera
    warps: WarpBundle
    clean: ImagePlane        # object-free perspective view
    perspective: ImagePlane  # with the object, Fresnel-composited
    panorama: ImagePlane     # object-free environment around the object centre


def _first_hits(scene: Scene, origin, dirs) -> np.ndarray:
    pts = np.empty(dirs.shape)
    bg = scene.background_pack
    for i, d in enumerate(dirs.reshape(-1, 3)):
        t, tri, _, _ = K.bvh_nearest(bg, origin[0], origin[1], origin[2], d[0], d[1], d[2], 0.0, K.INF)
        pts.reshape(-1, 3)[i] = origin + t * d
    return pts


def sphere_in_room(width: int = 128, height: int = 128, pano_height: int = 128, radius: float = 0.4,
                   distance: float = 2.0, refractive_index: float = 1.5, hfov_deg: float = 60.0,
                   texture=smooth_texture) -> RenderedScene:
    """Glass sphere in front of the camera inside a closed textured room."""
    room = box_mesh(np.array([-4.0, -3.0, -6.0]), np.array([4.0, 3.0, 2.0]), tag="background")
    center = np.array([0.0, 0.0, -distance])
    scene = Scene(Sphere(center, radius), room, refractive_index)
    cam = PerspectiveCamera.from_fov(width, height, hfov_deg)
    pano = PanoCamera.with_height(center, pano_height)
    warps = compile_warps(cam, pano, scene)

    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    dirs = cam.pixel_directions(xs, ys)
    clean = texture(_first_hits(scene, cam.center, dirs))

    pv, pu = np.mgrid[0:pano.height, 0:pano.width].astype(np.float64)
    pdirs = pano_dirs(pu, pv, pano.width, pano.height)
    panorama = texture(_first_hits(scene, center, pdirs))

    img = clean.copy()
    box = scene.bounding_box(cam.center, center)
    for i, j in zip(*np.nonzero(warps.object_mask)):
        path = trace_refraction_path(Ray(cam.center.copy(), dirs[i, j]), scene, bounding_box=box)
        refr = texture(path.vertices[-1])
        n = path.normals[1]
        d = dirs[i, j]
        r = d - 2.0 * (d @ n) * n
        refl = texture(_first_hits(scene, center, r[None])[0])
        w = warps.fresnel.weights[i, j]
        img[i, j] = w * refl + (1.0 - w) * refr
    return RenderedScene(scene, cam, pano, warps, ImagePlane(clean), ImagePlane(img), ImagePlane(panorama))


def tabletop_depth(cam: PerspectiveCamera, table_y: float = -0.6, wall_z: float = -5.0):
    """z-depth of a horizontal table meeting a back wall, seen from the default pose."""
    ys, xs = np.mgrid[0:cam.height, 0:cam.width].astype(np.float64)
    d = cam.pixel_directions(xs, ys)
    c = cam.center
    t_wall = (wall_z - c[2]) / d[..., 2]
    with np.errstate(divide="ignore"):
        t_table = np.where(d[..., 1] < 0, (table_y - c[1]) / d[..., 1], np.inf)
    t = np.minimum(t_wall, t_table)
    pts = c + t[..., None] * d
    return (pts - c) @ cam.optical_axis, pts


def write_demo_scene(out_dir, width: int = 160, height: int = 120, pano_height: int = 64,
                     steps: int = 8) -> Path:
    """Write a small self-contained tabletop scene: depth, clean image, sphere mesh, targets, config."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cam = PerspectiveCamera.from_fov(width, height, 60.0)
    depth, pts = tabletop_depth(cam)
    fileio.write_pfm(out / "depth.pfm", depth)
    checker = ((np.floor(pts[..., 0] * 2) + np.floor(pts[..., 2] * 2) + np.floor(pts[..., 1] * 2)) % 2)
    clean = 0.6 * smooth_texture(pts) + 0.3 * checker[..., None]
    save_image(out / "clean.png", ImagePlane(clean))
    mesh = uv_sphere(1.0, 24, 48)
    fileio.write_obj(out / "sphere.obj", mesh.vertices, mesh.triangles, mesh.normals)
    ph, pw = pano_height, 2 * pano_height
    v = np.linspace(0.0, 1.0, ph)[:, None, None]
    pano = np.broadcast_to(np.concatenate([0.3 + 0.5 * (1 - v), 0.4 + 0.4 * (1 - v), 0.6 + 0.3 * (1 - v)],
                                          axis=2), (ph, pw, 3)).copy()
    save_image(out / "target_panorama.png", ImagePlane(pano))
    save_image(out / "target_perspective.png", ImagePlane(clean))
    config = {
        "object": {"mesh": "sphere.obj", "material": "glass", "size": 0.4},
        "background": {"depth": "depth.pfm", "clean_image": "clean.png"},
        "camera": {"width": width, "height": height, "hfov_deg": 60.0},
        "panorama": {"height": pano_height},
        "sync": {"steps": steps, "seed": 0, "pyramid_levels": 3},
    }
    path = out / "scene.yaml"
    path.write_text(yaml.safe_dump(config, sort_keys=False))
    return path
