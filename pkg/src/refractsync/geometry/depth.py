"""Depth maps and their triangulation into background meshes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import fileio
from .camera import PerspectiveCamera
from .mesh import GeometryError, MIN_TRIANGLE_AREA, TriMesh

INVALID_DEPTH = 0.0
DEFAULT_DISCONTINUITY_RATIO = 3.0


@dataclass
class DepthMap:
    """Per-pixel z-depth in metres; non-positive or non-finite values are invalid."""

    depth: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.depth, dtype=np.float64)
        if d.ndim != 2:
            raise GeometryError("depth map must be 2-D")
        d = np.where(np.isfinite(d) & (d > 0), d, INVALID_DEPTH)
        self.depth = d

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def valid(self) -> np.ndarray:
        return self.depth > 0

    @classmethod
    def load(cls, path, meters_per_unit: float | None = None) -> "DepthMap":
        """PFM (metres) or 16-bit grayscale PNG scaled by ``meters_per_unit``."""
        path = str(path)
        if path.lower().endswith(".pfm"):
            d = fileio.read_pfm(path)
            if d.ndim == 3:
                d = d[..., 0]
            return cls(d)
        raw = fileio.read_png_raw(path)
        if raw.ndim != 2:
            raise fileio.FormatError(f"{path}: depth PNG must be single-channel")
        if meters_per_unit is None:
            raise fileio.FormatError("PNG depth requires a meters-per-unit scale")
        return cls(raw.astype(np.float64) * meters_per_unit)

    def save(self, path) -> None:
        fileio.write_pfm(path, self.depth)


def unproject(depth: DepthMap, cam: PerspectiveCamera) -> np.ndarray:
    """World points (H, W, 3) for every pixel; invalid pixels give the camera centre."""
    h, w = depth.depth.shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    z = depth.depth
    p_cam = np.stack([(xs - cam.cx) / cam.fx * z, (ys - cam.cy) / cam.fy * z, z], axis=-1)
    return p_cam @ cam.rotation.T + cam.center


def depth_to_mesh(depth: DepthMap, cam: PerspectiveCamera,
                  discontinuity_ratio: float = DEFAULT_DISCONTINUITY_RATIO) -> TriMesh:
    """Triangulate a depth map, two triangles per pixel quad.

    Quads with an invalid corner, or whose max/min corner depth exceeds
    ``discontinuity_ratio``, are dropped. One vertex per valid pixel.
    """
    if (depth.width, depth.height) != (cam.width, cam.height):
        raise GeometryError("depth map and camera resolutions differ")
    valid = depth.valid
    if not valid.any():
        raise GeometryError("no reconstructable surface")
    h, w = valid.shape
    index = np.full((h, w), -1, dtype=np.int64)
    index[valid] = np.arange(int(valid.sum()))
    verts = unproject(depth, cam)[valid]

    d = depth.depth
    tl, tr, bl, br = d[:-1, :-1], d[:-1, 1:], d[1:, :-1], d[1:, 1:]
    dmax = np.maximum(np.maximum(tl, tr), np.maximum(bl, br))
    dmin = np.minimum(np.minimum(tl, tr), np.minimum(bl, br))
    with np.errstate(divide="ignore", invalid="ignore"):
        keep = (dmin > 0) & (dmax <= discontinuity_ratio * dmin)
    i_tl, i_tr = index[:-1, :-1][keep], index[:-1, 1:][keep]
    i_bl, i_br = index[1:, :-1][keep], index[1:, 1:][keep]
    # winding is irrelevant for background geometry
    tris = np.concatenate([np.stack([i_tl, i_bl, i_tr], axis=1),
                           np.stack([i_tr, i_bl, i_br], axis=1)])
    # interleave per quad so triangle order follows pixel order
    tris = tris.reshape(2, -1, 3).transpose(1, 0, 2).reshape(-1, 3)
    if len(tris):
        v = verts[tris]
        area = 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)
        tris = tris[area > MIN_TRIANGLE_AREA]
    return TriMesh(verts, tris, None, "background")
