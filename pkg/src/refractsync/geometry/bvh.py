"""BVH construction and nearest-hit queries over triangle meshes."""

from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels as K
from .mesh import GeometryError, Hit, Ray, Sphere, TriMesh

_EMPTY3 = np.zeros((0, 3))


class BVH:
    """Immutable bounding-volume hierarchy over one ``TriMesh``.

    The node and triangle arrays are packed into ``self.pack`` so that the
    compiled kernels can traverse it without Python overhead.
    """

    def __init__(self, mesh: TriMesh):
        if len(mesh.triangles) == 0:
            raise GeometryError("empty geometry")
        self.mesh = mesh
        v = mesh.vertices
        t = mesh.triangles
        a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
        lo = np.minimum(np.minimum(a, b), c)
        hi = np.maximum(np.maximum(a, b), c)
        bmin, bmax, left, first, count, prims = K.build_bvh(lo, hi, 0.5 * (lo + hi))
        self.depth = _tree_depth(left, count)
        if self.depth >= K.STACK_SIZE - 1:
            raise GeometryError(f"BVH too deep ({self.depth}) for traversal stack")
        vn = mesh.normals if mesh.normals is not None else _EMPTY3
        self.pack = (
            bmin, bmax, left, first, count, prims,
            np.ascontiguousarray(a), np.ascontiguousarray(b - a), np.ascontiguousarray(c - a),
            np.ascontiguousarray(mesh.face_normals), t, np.ascontiguousarray(vn),
        )

    @property
    def n_nodes(self) -> int:
        return len(self.pack[0])

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.pack[4]))

    def nearest(self, ray: Ray, tmin: float = 0.0, tmax: float = np.inf):
        o, d = ray.origin, ray.direction
        return K.bvh_nearest(self.pack, o[0], o[1], o[2], d[0], d[1], d[2], tmin, tmax)

    def brute_nearest(self, ray: Ray, tmin: float = 0.0, tmax: float = np.inf):
        o, d = ray.origin, ray.direction
        return K.brute_nearest(self.pack, o[0], o[1], o[2], d[0], d[1], d[2], tmin, tmax)

    def hit(self, ray: Ray, tmin: float = 0.0, tmax: float = np.inf) -> Optional[Hit]:
        t, tri, u, v = self.nearest(ray, tmin, tmax)
        if tri < 0:
            return None
        d = ray.direction
        nx, ny, nz, front = K.mesh_normal(self.pack, tri, u, v, d[0], d[1], d[2])
        return Hit(ray.at(t), np.array([nx, ny, nz]), float(t), self.mesh.tag, int(tri), bool(front))


def _tree_depth(left: np.ndarray, count: np.ndarray) -> int:
    depth = np.zeros(len(left), dtype=np.int64)
    internal = np.flatnonzero(count == 0)
    # children are always allocated after their parent
    for node in internal:
        depth[left[node]] = depth[left[node] + 1] = depth[node] + 1
    return int(depth.max()) if len(depth) else 0


def build_bvh(mesh: TriMesh) -> BVH:
    return BVH(mesh)


class SphereShape:
    """Adapter giving an analytic sphere the same query surface as a BVH."""

    def __init__(self, sphere: Sphere):
        self.sphere = sphere
        self.params = np.array([*sphere.center, sphere.radius])

    def hit(self, ray: Ray, tmin: float = 0.0, tmax: float = np.inf) -> Optional[Hit]:
        o, d = ray.origin, ray.direction
        t = K.sphere_hit(self.params, o[0], o[1], o[2], d[0], d[1], d[2], tmin, tmax)
        if not np.isfinite(t):
            return None
        p = ray.at(t)
        nx, ny, nz, front = K.sphere_normal(self.params, p[0], p[1], p[2], d[0], d[1], d[2])
        return Hit(p, np.array([nx, ny, nz]), float(t), self.sphere.tag, 0, bool(front))


Shape = Union[TriMesh, Sphere]


def accelerate(shape: Union[Shape, BVH, SphereShape]):
    if isinstance(shape, (BVH, SphereShape)):
        return shape
    if isinstance(shape, Sphere):
        return SphereShape(shape)
    return BVH(shape)


def intersect(ray: Ray, scene: Union[Shape, BVH, SphereShape, Sequence], eps: float = 0.0) -> Optional[Hit]:
    """Nearest hit beyond ``eps`` over one or more shapes.

    Equal distances across shapes go to the earlier shape in ``scene``.
    """
    if not isinstance(scene, (list, tuple)):
        scene = [scene]
    best = None
    for shape in scene:
        h = accelerate(shape).hit(ray, eps)
        if h is not None and (best is None or h.distance < best.distance):
            best = h
    return best
