"""Automatic placement of the transparent object on a supporting surface."""

from __future__ import annotations

from typing import Optional, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .camera import PerspectiveCamera
from .mesh import GeometryError, Sphere, TriMesh

MAX_DROP_BELOW_AXIS = 1.5
DEFAULT_ANGLE_TOLERANCE_DEG = 10.0
DEFAULT_OBJECT_SIZE = 0.3


class PlacementError(GeometryError):
    pass


def _vertex_heights(obj: Union[TriMesh, Sphere], up: np.ndarray) -> tuple[float, np.ndarray]:
    """Lowest height along ``up`` and the bounding-box centre."""
    lo, hi = obj.bounds()
    center = 0.5 * (lo + hi)
    if isinstance(obj, Sphere):
        return float(obj.center @ up - obj.radius), obj.center.copy()
    return float(np.min(obj.vertices @ up)), center


def _diameter(obj: Union[TriMesh, Sphere]) -> float:
    if isinstance(obj, Sphere):
        return 2.0 * obj.radius
    lo, hi = obj.bounds()
    return float(np.max(hi - lo))


def _cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _line_intervals(tri2d: np.ndarray, p0: np.ndarray, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Parameter interval [s0, s1] of the 2-D line p0 + s*a inside each triangle."""
    n = len(tri2d)
    s0 = np.full(n, -np.inf)
    s1 = np.full(n, np.inf)
    area = _cross2(tri2d[:, 1] - tri2d[:, 0], tri2d[:, 2] - tri2d[:, 0])
    sign = np.sign(area)
    for k in range(3):
        e0, e1 = tri2d[:, k], tri2d[:, (k + 1) % 3]
        edge = e1 - e0
        # inside when sign * cross(edge, p - e0) >= 0, linear in s: c0 + s*c1
        c0 = sign * _cross2(edge, p0 - e0)
        c1 = sign * _cross2(edge, np.broadcast_to(a, edge.shape))
        with np.errstate(divide="ignore", invalid="ignore"):
            root = -c0 / c1
        pos = c1 > 0
        neg = c1 < 0
        s0 = np.where(pos, np.maximum(s0, root), s0)
        s1 = np.where(neg, np.minimum(s1, root), s1)
        never = (c1 == 0) & (c0 < 0)
        s0 = np.where(never, np.inf, s0)
    return s0, s1


def place_object(obj: Union[TriMesh, Sphere], background: TriMesh, cam: PerspectiveCamera,
                 up: Optional[np.ndarray] = None, size: Optional[float] = DEFAULT_OBJECT_SIZE,
                 angle_tolerance_deg: float = DEFAULT_ANGLE_TOLERANCE_DEG,
                 max_drop: float = MAX_DROP_BELOW_AXIS) -> np.ndarray:
    """Rigid (plus uniform scale) transform putting ``obj`` on the nearest tabletop.

    Near-horizontal background triangles below the camera and no more than
    ``max_drop`` below the optical axis are candidates. The candidate nearest
    the camera seeds a connected surface; the object's lowest point lands on
    that surface, centred along the axis' vertical projection.
    """
    up = cam.up if up is None else np.asarray(up, dtype=np.float64)
    up = up / np.linalg.norm(up)
    axis = cam.optical_axis
    c = cam.center

    v = background.vertices
    t = background.triangles
    if len(t) == 0:
        raise PlacementError("no supporting surface")
    cent = v[t].mean(axis=1)
    fn = background.face_normals
    horizontal = np.abs(fn @ up) >= np.cos(np.radians(angle_tolerance_deg))
    rel = cent - c
    s = rel @ axis
    on_axis = c + s[:, None] * axis
    drop = (on_axis - cent) @ up
    below_camera = rel @ up < 0
    cand = horizontal & below_camera & (s > 0) & (drop <= max_drop)
    if not cand.any():
        raise PlacementError("no supporting surface")

    idx = np.flatnonzero(cand)
    seed = idx[np.argmin(np.linalg.norm(rel[idx], axis=1))]
    # connected candidate triangles sharing a vertex with each other
    ct = t[idx]
    rows = np.repeat(np.arange(len(idx)), 3)
    graph = coo_matrix((np.ones(len(rows)), (rows, ct.ravel())),
                       shape=(len(idx), len(v))).tocsr()
    adj = graph @ graph.T
    _, labels = connected_components(adj, directed=False)
    comp = idx[labels == labels[np.searchsorted(idx, seed)]]

    # horizontal frame: e1 along the axis' horizontal projection
    a_h = axis - (axis @ up) * up
    if np.linalg.norm(a_h) < 1e-9:
        target = _nearest_to_axis(cent[comp], c, axis)
        tri_id = comp[np.argmin(np.linalg.norm(cent[comp] - target, axis=1))]
    else:
        e1 = a_h / np.linalg.norm(a_h)
        e2 = np.cross(up, e1)
        tri2d = np.stack([(v[t[comp]] - c) @ e1, (v[t[comp]] - c) @ e2], axis=-1)
        s0, s1 = _line_intervals(tri2d, np.zeros(2), np.array([1.0, 0.0]))
        hit = s0 <= s1
        if hit.any():
            lo, hi = s0[hit].min(), s1[hit].max()
            mid = 0.5 * (lo + hi)
            inside = hit & (s0 <= mid) & (s1 >= mid)
            if not inside.any():
                inside = hit
            tri_id = comp[np.flatnonzero(inside)[0]]
            target = c + mid * e1
        else:
            target = _nearest_to_axis(cent[comp], c, axis)
            tri_id = comp[np.argmin(np.linalg.norm(cent[comp] - target, axis=1))]
    # lift the target onto the chosen triangle's plane along ``up``
    p0 = v[t[tri_id, 0]]
    n = fn[tri_id]
    target = target + ((p0 - target) @ n) / (up @ n) * up

    scale = 1.0 if size is None else size / _diameter(obj)
    low, center = _vertex_heights(obj, up)
    center_s = center * scale
    base = center_s - (center_s @ up - low * scale) * up
    m = np.eye(4)
    m[:3, :3] *= scale
    m[:3, 3] = target - base
    return m


def _nearest_to_axis(points: np.ndarray, c: np.ndarray, axis: np.ndarray) -> np.ndarray:
    rel = points - c
    perp = rel - (rel @ axis)[:, None] * axis
    return points[np.argmin(np.linalg.norm(perp, axis=1))]
