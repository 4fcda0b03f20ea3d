"""A transparent object inside a background, packed for the ray kernels."""

from __future__ import annotations

from typing import Optional, Union

import numpy as np

from .bvh import BVH
from .mesh import GeometryError, Sphere, TriMesh

SELF_INTERSECTION_SCALE = 1e-4
BOX_INFLATION = 0.10

OBJECT_MESH = 0
OBJECT_SPHERE = 1
OBJECT_NONE = 2


def empty_pack():
    z3 = np.zeros((0, 3))
    zi = np.zeros(0, dtype=np.int64)
    return (np.zeros((1, 3)), np.zeros((1, 3)), np.zeros(1, dtype=np.int64), zi.copy(),
            np.zeros(1, dtype=np.int64), zi.copy(), z3.copy(), z3.copy(), z3.copy(), z3.copy(),
            np.zeros((0, 3), dtype=np.int64), z3.copy())


class Scene:
    """Transparent object (mesh or analytic sphere) plus background geometry.

    ``eps`` is the self-intersection offset: hits closer than this to a ray
    origin are ignored. It defaults to 1e-4 of the scene diagonal.
    """

    def __init__(self, obj: Optional[Union[TriMesh, Sphere]], background: Optional[TriMesh] = None,
                 refractive_index: float = 1.5, eps: Optional[float] = None):
        if refractive_index < 1.0:
            raise GeometryError("refractive index must be >= 1")
        self.object = obj
        self.background = background
        self.refractive_index = float(refractive_index)
        self.sphere_params = np.zeros(4)
        self.object_bvh = None
        self.object_pack = empty_pack()
        if obj is None:
            self.object_kind = OBJECT_NONE
        elif isinstance(obj, Sphere):
            self.object_kind = OBJECT_SPHERE
            self.sphere_params = np.array([*obj.center, obj.radius])
        else:
            self.object_kind = OBJECT_MESH
            self.object_bvh = BVH(obj)
            self.object_pack = self.object_bvh.pack
        self.background_bvh = None
        self.background_pack = empty_pack()
        if background is not None and len(background.triangles):
            self.background_bvh = BVH(background)
            self.background_pack = self.background_bvh.pack
        lo, hi = self.bounds()
        diag = float(np.linalg.norm(hi - lo))
        self.eps = SELF_INTERSECTION_SCALE * diag if eps is None else float(eps)

    def bounds(self, *points) -> tuple[np.ndarray, np.ndarray]:
        los, his = [], []
        for shape in (self.object, self.background):
            if shape is not None and (not isinstance(shape, TriMesh) or len(shape.triangles)):
                lo, hi = shape.bounds()
                los.append(lo)
                his.append(hi)
        for p in points:
            p = np.asarray(p, dtype=np.float64).reshape(3)
            los.append(p)
            his.append(p)
        if not los:
            raise GeometryError("empty geometry")
        return np.min(los, axis=0), np.max(his, axis=0)

    def bounding_box(self, *points) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned box around everything (and ``points``), inflated by 10%."""
        lo, hi = self.bounds(*points)
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo) * (1.0 + BOX_INFLATION)
        half = np.maximum(half, 1e-6)
        return mid - half, mid + half
