"""Triangle meshes, analytic spheres, rays and hits."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

MESH_TAGS = ("object", "background", "bounding-box")
MIN_TRIANGLE_AREA = 1e-12


class GeometryError(ValueError):
    """Raised for invalid or empty geometry."""


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64).reshape(3)
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise GeometryError("non-unit vector: ray direction must have unit norm")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)

    @classmethod
    def towards(cls, origin, direction) -> "Ray":
        d = np.asarray(direction, dtype=np.float64)
        return cls(origin, d / np.linalg.norm(d))

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


@dataclass(frozen=True)
class Hit:
    point: np.ndarray
    normal: np.ndarray  # oriented against the incoming ray
    distance: float
    mesh_tag: str
    triangle_index: int
    front_face: bool = True  # incoming ray hit the outward side


@dataclass
class TriMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    normals: Optional[np.ndarray] = None
    tag: str = "background"
    _face_normals: Optional[np.ndarray] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.tag not in MESH_TAGS:
            raise GeometryError(f"unknown mesh tag {self.tag!r}")
        if self.triangles.size:
            if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
                raise GeometryError("triangle index out of range")
            area = 0.5 * np.linalg.norm(self._cross(), axis=1)
            if np.any(area <= MIN_TRIANGLE_AREA):
                bad = int(np.argmax(area <= MIN_TRIANGLE_AREA))
                raise GeometryError(f"degenerate triangle {bad} (area <= {MIN_TRIANGLE_AREA:g})")
        if self.normals is not None:
            n = np.ascontiguousarray(self.normals, dtype=np.float64).reshape(-1, 3)
            if len(n) != len(self.vertices):
                raise GeometryError("per-vertex normals must match vertex count")
            norm = np.linalg.norm(n, axis=1, keepdims=True)
            if np.any(norm == 0):
                raise GeometryError("zero-length vertex normal")
            self.normals = n / norm
        if self.tag == "object" and not self.is_watertight():
            raise GeometryError("object meshes must be watertight")

    def _cross(self) -> np.ndarray:
        v = self.vertices
        t = self.triangles
        return np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])

    @property
    def face_normals(self) -> np.ndarray:
        if self._face_normals is None:
            c = self._cross()
            self._face_normals = c / np.linalg.norm(c, axis=1, keepdims=True)
        return self._face_normals

    def __len__(self) -> int:
        return len(self.triangles)

    def is_watertight(self) -> bool:
        """Every undirected edge is shared by exactly two triangles."""
        if len(self.triangles) == 0:
            return False
        t = self.triangles
        edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        edges.sort(axis=1)
        _, counts = np.unique(edges, axis=0, return_counts=True)
        return bool(np.all(counts == 2))

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if len(self.vertices) == 0:
            raise GeometryError("empty geometry")
        used = self.vertices[np.unique(self.triangles)] if len(self.triangles) else self.vertices
        return used.min(axis=0), used.max(axis=0)

    def transformed(self, matrix: np.ndarray) -> "TriMesh":
        """Apply a 4x4 similarity transform (rotation, uniform scale, translation)."""
        m = np.asarray(matrix, dtype=np.float64)
        v = self.vertices @ m[:3, :3].T + m[:3, 3]
        n = None
        if self.normals is not None:
            n = self.normals @ np.linalg.inv(m[:3, :3])
        return TriMesh(v, self.triangles, n, self.tag)


@dataclass(frozen=True)
class Sphere:
    """Analytic sphere; used where exact normals matter."""

    center: np.ndarray
    radius: float
    tag: str = "object"

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(3))
        if not self.radius > 0:
            raise GeometryError("sphere radius must be positive")

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.center - self.radius, self.center + self.radius

    def transformed(self, matrix: np.ndarray) -> "Sphere":
        m = np.asarray(matrix, dtype=np.float64)
        scale = float(np.cbrt(abs(np.linalg.det(m[:3, :3]))))
        return Sphere(m[:3, :3] @ self.center + m[:3, 3], self.radius * scale, self.tag)


def uv_sphere(radius: float = 1.0, n_lat: int = 32, n_lon: int = 64,
              center=(0.0, 0.0, 0.0), smooth: bool = True) -> TriMesh:
    """Watertight latitude/longitude sphere with outward winding.

    The triangle count is ``2 * n_lon * (n_lat - 1)``.
    """
    center = np.asarray(center, dtype=np.float64)
    theta = np.linspace(0.0, np.pi, n_lat + 1)[1:-1]
    phi = np.linspace(0.0, 2 * np.pi, n_lon, endpoint=False)
    st, ct = np.sin(theta)[:, None], np.cos(theta)[:, None]
    ring = np.stack([st * np.cos(phi), ct.repeat(n_lon, 1), st * np.sin(phi)], axis=-1).reshape(-1, 3)
    unit = np.concatenate([[[0.0, 1.0, 0.0]], ring, [[0.0, -1.0, 0.0]]])
    top, bottom = 0, len(unit) - 1

    def ring_idx(r, k):
        return 1 + r * n_lon + (k % n_lon)

    tris = []
    for k in range(n_lon):
        tris.append((top, ring_idx(0, k + 1), ring_idx(0, k)))
    for r in range(n_lat - 2):
        for k in range(n_lon):
            a, b = ring_idx(r, k), ring_idx(r, k + 1)
            c, d = ring_idx(r + 1, k), ring_idx(r + 1, k + 1)
            tris.append((a, b, d))
            tris.append((a, d, c))
    for k in range(n_lon):
        tris.append((bottom, ring_idx(n_lat - 2, k), ring_idx(n_lat - 2, k + 1)))
    tris = np.asarray(tris, dtype=np.int64)
    mesh = TriMesh(unit * radius + center, tris, unit.copy() if smooth else None, "object")
    # winding check: outward normals point away from the center
    fn = mesh.face_normals
    cen = mesh.vertices[tris].mean(axis=1) - center
    if np.mean(np.einsum("ij,ij->i", fn, cen)) < 0:
        mesh = TriMesh(mesh.vertices, tris[:, ::-1], mesh.normals, "object")
    return mesh


def sphere_with_triangles(target: int, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """UV sphere with at least ``target`` triangles, close to a 2:1 longitude/latitude split."""
    n_lat = max(3, int(round(np.sqrt(target / 4.0))) + 1)
    # triangle count is 2 * n_lon * (n_lat - 1)
    n_lon = max(3, int(np.ceil(target / (2.0 * (n_lat - 1)))))
    return uv_sphere(radius, n_lat, n_lon, center)


def box_mesh(lo, hi, tag: str = "bounding-box") -> TriMesh:
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    corners = np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
    # corner index = 4*ix + 2*iy + iz ; faces wound outward
    quads = [(0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1), (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3)]
    tris = []
    for a, b, c, d in quads:
        tris += [(a, b, c), (a, c, d)]
    tris = np.asarray(tris)
    v = corners[tris]
    n = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    inward = np.einsum("ij,ij->i", n, v.mean(axis=1) - 0.5 * (lo + hi)) < 0
    tris[inward] = tris[inward][:, ::-1]
    return TriMesh(corners, tris, None, tag)


def merge_meshes(meshes, tag: str = "background") -> TriMesh:
    verts, tris, offset = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        offset += len(m.vertices)
    return TriMesh(np.concatenate(verts), np.concatenate(tris), None, tag)
