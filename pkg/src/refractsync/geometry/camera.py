"""Pinhole and equirectangular cameras.

Continuous pixel coordinates put pixel centres on integers: pixel
``(row, col)`` sits at ``(x, y) = (col, row)``. The perspective camera frame
is x right, y down, z forward; the default pose maps it to a world frame with
+y up and the optical axis along -z.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import Ray

DEFAULT_POSE = np.diag([1.0, -1.0, -1.0, 1.0])


class CameraError(ValueError):
    pass


@dataclass(frozen=True)
class PerspectiveCamera:
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    pose: np.ndarray = field(default_factory=lambda: DEFAULT_POSE.copy())

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise CameraError("focal lengths must be positive")
        if not (0 <= self.cx <= self.width - 1 and 0 <= self.cy <= self.height - 1):
            raise CameraError("principal point must lie inside the image")
        pose = np.asarray(self.pose, dtype=np.float64)
        if pose.shape != (4, 4):
            raise CameraError("pose must be a 4x4 camera-to-world transform")
        r = pose[:3, :3]
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-9) or np.linalg.det(r) < 0:
            raise CameraError("pose rotation must be proper orthonormal")
        object.__setattr__(self, "pose", pose)

    @classmethod
    def from_fov(cls, width: int, height: int, hfov_deg: float, pose=None) -> "PerspectiveCamera":
        f = 0.5 * (width - 1) / np.tan(np.radians(hfov_deg) / 2)
        return cls(width, height, f, f, (width - 1) / 2, (height - 1) / 2,
                   DEFAULT_POSE.copy() if pose is None else pose)

    @property
    def rotation(self) -> np.ndarray:
        return self.pose[:3, :3]

    @property
    def center(self) -> np.ndarray:
        return self.pose[:3, 3]

    @property
    def optical_axis(self) -> np.ndarray:
        return self.rotation[:, 2]

    @property
    def up(self) -> np.ndarray:
        """World direction of the camera's -y axis."""
        return -self.rotation[:, 1]

    @property
    def params(self) -> np.ndarray:
        """Packed for kernels: fx, fy, cx, cy, width, height."""
        return np.array([self.fx, self.fy, self.cx, self.cy, self.width, self.height], dtype=np.float64)

    def pixel_directions(self, xs, ys) -> np.ndarray:
        """Unit world directions through continuous pixel coordinates."""
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        cam = np.stack([(xs - self.cx) / self.fx, (ys - self.cy) / self.fy, np.ones_like(xs)], axis=-1)
        cam /= np.linalg.norm(cam, axis=-1, keepdims=True)
        return cam @ self.rotation.T

    def project_points(self, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Returns (xy, z_depth, in_front) for world points."""
        p = (np.asarray(points, dtype=np.float64) - self.center) @ self.rotation
        z = p[..., 2]
        in_front = z > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            x = self.fx * p[..., 0] / z + self.cx
            y = self.fy * p[..., 1] / z + self.cy
        return np.stack([x, y], axis=-1), z, in_front

    def in_image(self, xy) -> np.ndarray:
        xy = np.asarray(xy)
        return ((xy[..., 0] >= 0) & (xy[..., 0] <= self.width - 1)
                & (xy[..., 1] >= 0) & (xy[..., 1] <= self.height - 1))


@dataclass(frozen=True)
class PanoCamera:
    center: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        if self.width != 2 * self.height:
            raise CameraError("equirectangular panoramas need width = 2 * height")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(3))

    @classmethod
    def with_height(cls, center, height: int) -> "PanoCamera":
        return cls(center, 2 * height, height)


def pixel_ray(cam: PerspectiveCamera, pixel) -> Ray:
    x, y = pixel
    return Ray(cam.center.copy(), cam.pixel_directions(x, y))


def project_persp(cam: PerspectiveCamera, direction) -> tuple[np.ndarray, bool]:
    """Pixel of a world direction seen from the camera centre; flag is False behind the camera."""
    d = np.asarray(direction, dtype=np.float64)
    xy, _, front = cam.project_points(cam.center + d)
    return xy, bool(np.all(front))


def pano_direction(cam: PanoCamera, pixel) -> np.ndarray:
    u, v = np.asarray(pixel[0], dtype=np.float64), np.asarray(pixel[1], dtype=np.float64)
    return pano_dirs(u, v, cam.width, cam.height)


def pano_dirs(u, v, width: int, height: int) -> np.ndarray:
    lon = (np.asarray(u) / width - 0.5) * 2.0 * np.pi
    lat = (0.5 - np.asarray(v) / height) * np.pi
    cl = np.cos(lat)
    return np.stack([np.sin(lon) * cl, np.sin(lat), -np.cos(lon) * cl], axis=-1)


def pano_uv(directions, width: int, height: int) -> np.ndarray:
    d = np.asarray(directions, dtype=np.float64)
    d = d / np.linalg.norm(d, axis=-1, keepdims=True)
    u = (np.arctan2(d[..., 0], -d[..., 2]) / (2 * np.pi) + 0.5) * width
    v = (0.5 - np.arcsin(np.clip(d[..., 1], -1.0, 1.0)) / np.pi) * height
    u = np.where(u >= width, u - width, u)
    return np.stack([u, v], axis=-1)


def project_pano(cam: PanoCamera, direction) -> np.ndarray:
    return pano_uv(direction, cam.width, cam.height)
