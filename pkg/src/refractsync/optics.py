"""Refraction, reflection, Fresnel coefficients and light-path tracing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

import numpy as np
from numba import njit

from .geometry import _kernels as K
from .geometry.mesh import Ray
from .geometry.scene import Scene

UNIT_TOL = 1e-6
GAMMA_CLAMP = 1e-12
DEFAULT_MAX_EVENTS = 8

REFRACTIVE_INDEX = {
    "water": 1.333,
    "plastic": 1.45,
    "glass": 1.5,
    "diamond": 2.418,
}

# event / terminal codes shared with the kernels
EV_REFRACTION = 0
EV_TIR = 1
TERM_ESCAPED = 0
TERM_BACKGROUND = 1
TERM_ABSORBED = 2
TERM_BOX = 3


class OpticsError(ValueError):
    pass


class Event(str, Enum):
    REFRACTION = "refraction"
    TOTAL_INTERNAL_REFLECTION = "total_internal_reflection"
    REFLECTION = "reflection"
    ESCAPE = "escape"


class Terminal(str, Enum):
    ESCAPED = "escaped"
    HIT_BACKGROUND = "hit_background"
    ABSORBED = "absorbed"
    HIT_BOUNDING_BOX = "hit_bounding_box"


@dataclass(frozen=True)
class Medium:
    refractive_index: float

    def __post_init__(self):
        if not self.refractive_index >= 1.0:
            raise OpticsError("refractive index must be >= 1")

    @classmethod
    def named(cls, name: str) -> "Medium":
        return cls(REFRACTIVE_INDEX[name.lower()])


@dataclass(frozen=True)
class Refracted:
    direction: np.ndarray


@dataclass(frozen=True)
class TIR:
    direction: np.ndarray


def _unit(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(3)
    if abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
        raise OpticsError(f"non-unit vector: {name}")
    return v


@njit(cache=True)
def refract_kernel(dx, dy, dz, nx, ny, nz, alpha):
    """Snell refraction of d at normal n (n against d). Returns (ox, oy, oz, is_tir)."""
    beta = -(dx * nx + dy * ny + dz * nz)
    gamma = 1.0 - alpha * alpha * (1.0 - beta * beta)
    if gamma < 0.0 and gamma > -GAMMA_CLAMP:
        gamma = 0.0
    if gamma < 0.0:
        c = 2.0 * beta
        return dx + c * nx, dy + c * ny, dz + c * nz, True
    k = alpha * beta - math.sqrt(gamma)
    ox = alpha * dx + k * nx
    oy = alpha * dy + k * ny
    oz = alpha * dz + k * nz
    ln = math.sqrt(ox * ox + oy * oy + oz * oz)
    return ox / ln, oy / ln, oz / ln, False


@njit(cache=True)
def fresnel_kernel(dx, dy, dz, nx, ny, nz, nu0, nu1):
    """(R_p, R_s) for light going from index nu0 into nu1."""
    beta = -(dx * nx + dy * ny + dz * nz)
    alpha = nu0 / nu1
    gamma = 1.0 - alpha * alpha * (1.0 - beta * beta)
    if gamma < 0.0 and gamma > -GAMMA_CLAMP:
        gamma = 0.0
    if gamma < 0.0:
        return 1.0, 1.0
    sg = math.sqrt(gamma)
    dp = nu1 * beta + nu0 * sg
    ds = nu0 * beta + nu1 * sg
    rp = ((nu1 * beta - nu0 * sg) / dp) ** 2 if dp != 0.0 else 1.0
    rs = ((nu0 * beta - nu1 * sg) / ds) ** 2 if ds != 0.0 else 1.0
    return rp, rs


def refract_direction(d, n, nu_in: float, nu_out: float) -> Union[Refracted, TIR]:
    """Refract ``d`` through an interface with normal ``n`` facing against ``d``."""
    d = _unit(d, "direction")
    n = _unit(n, "normal")
    if nu_in <= 0 or nu_out <= 0:
        raise OpticsError("refractive indices must be positive")
    if d @ n > 0:
        raise OpticsError("normal must face against the incoming direction")
    ox, oy, oz, tir = refract_kernel(d[0], d[1], d[2], n[0], n[1], n[2], nu_in / nu_out)
    out = np.array([ox, oy, oz])
    return TIR(out) if tir else Refracted(out)


def reflect_direction(d, n) -> np.ndarray:
    d = _unit(d, "direction")
    n = _unit(n, "normal")
    return d - 2.0 * (d @ n) * n


def fresnel_reflectance(d, n, nu0: float, nu1: float) -> tuple[float, float]:
    """Parallel and perpendicular reflectance at an interface from ``nu0`` into ``nu1``.

    Both are 1 under total internal reflection.
    """
    d = _unit(d, "direction")
    n = _unit(n, "normal")
    if d @ n > 0:
        raise OpticsError("normal must face against the incoming direction")
    rp, rs = fresnel_kernel(d[0], d[1], d[2], n[0], n[1], n[2], nu0, nu1)
    return float(rp), float(rs)


@njit(cache=True)
def trace_kernel(kind, sph, obj, bg, nu, ox, oy, oz, dx, dy, dz, eps, max_events,
                 use_box, box_lo, box_hi, verts, dirs, norms, events):
    """Trace one refraction path. Returns (n_vertices, terminal code).

    ``verts[0]``/``dirs[0]`` hold the start. Object interaction k writes vertex
    k+1 with its outgoing direction and the normal used. A background or box
    hit appends a final vertex that keeps the incoming direction.
    """
    verts[0, 0], verts[0, 1], verts[0, 2] = ox, oy, oz
    dirs[0, 0], dirs[0, 1], dirs[0, 2] = dx, dy, dz
    nv = 1
    n_ev = 0
    while True:
        to, tri, nx, ny, nz, front = K.object_hit(kind, sph, obj, ox, oy, oz, dx, dy, dz, eps, K.INF)
        tb, btri, bu, bv = K.bvh_nearest(bg, ox, oy, oz, dx, dy, dz, eps, K.INF)
        if btri >= 0 and tb <= to:
            verts[nv, 0], verts[nv, 1], verts[nv, 2] = ox + tb * dx, oy + tb * dy, oz + tb * dz
            dirs[nv, 0], dirs[nv, 1], dirs[nv, 2] = dx, dy, dz
            return nv + 1, TERM_BACKGROUND
        if to == K.INF:
            if use_box:
                te = K.box_exit(box_lo, box_hi, ox, oy, oz, dx, dy, dz)
                if te > 0.0 and te < K.INF:
                    verts[nv, 0], verts[nv, 1], verts[nv, 2] = ox + te * dx, oy + te * dy, oz + te * dz
                    dirs[nv, 0], dirs[nv, 1], dirs[nv, 2] = dx, dy, dz
                    return nv + 1, TERM_BOX
            return nv, TERM_ESCAPED
        if n_ev >= max_events:
            return nv, TERM_ABSORBED
        px, py, pz = ox + to * dx, oy + to * dy, oz + to * dz
        if front:
            alpha = 1.0 / nu
        else:
            alpha = nu
        rx, ry, rz, tir = refract_kernel(dx, dy, dz, nx, ny, nz, alpha)
        events[n_ev] = EV_TIR if tir else EV_REFRACTION
        n_ev += 1
        verts[nv, 0], verts[nv, 1], verts[nv, 2] = px, py, pz
        dirs[nv, 0], dirs[nv, 1], dirs[nv, 2] = rx, ry, rz
        norms[nv, 0], norms[nv, 1], norms[nv, 2] = nx, ny, nz
        nv += 1
        ox, oy, oz = px, py, pz
        dx, dy, dz = rx, ry, rz


@dataclass
class LightPath:
    """Piecewise-linear ray: vertex i continues along ``directions[i]``."""

    vertices: np.ndarray
    directions: np.ndarray
    cumulative_lengths: np.ndarray
    events: list = field(default_factory=list)
    normals: Optional[np.ndarray] = None
    terminal: Terminal = Terminal.ESCAPED
    terminal_point: Optional[np.ndarray] = None
    terminal_direction: Optional[np.ndarray] = None

    def point_at(self, t: float) -> np.ndarray:
        i = int(np.searchsorted(self.cumulative_lengths, t, side="right") - 1)
        i = max(0, min(i, len(self.vertices) - 1))
        return self.vertices[i] + (t - self.cumulative_lengths[i]) * self.directions[i]

    @property
    def exit_direction(self) -> np.ndarray:
        return self.directions[-1]


_TERMINALS = {TERM_ESCAPED: Terminal.ESCAPED, TERM_BACKGROUND: Terminal.HIT_BACKGROUND,
              TERM_ABSORBED: Terminal.ABSORBED, TERM_BOX: Terminal.HIT_BOUNDING_BOX}


def trace_refraction_path(ray: Ray, scene: Scene, max_events: int = DEFAULT_MAX_EVENTS,
                          bounding_box: Optional[tuple] = None) -> LightPath:
    """Follow ``ray`` through the object (refraction and TIR) until it leaves the scene."""
    if max_events < 2:
        raise OpticsError("max_events must be at least 2")
    o, d = ray.origin, ray.direction
    verts = np.zeros((max_events + 2, 3))
    dirs = np.zeros((max_events + 2, 3))
    norms = np.zeros((max_events + 2, 3))
    events = np.zeros(max_events + 1, dtype=np.int64)
    use_box = bounding_box is not None
    lo, hi = bounding_box if use_box else (np.zeros(3), np.zeros(3))
    nv, term = trace_kernel(scene.object_kind, scene.sphere_params, scene.object_pack,
                            scene.background_pack, scene.refractive_index,
                            o[0], o[1], o[2], d[0], d[1], d[2], scene.eps, max_events,
                            use_box, np.asarray(lo, float), np.asarray(hi, float),
                            verts, dirs, norms, events)
    verts, dirs, norms = verts[:nv].copy(), dirs[:nv].copy(), norms[:nv].copy()
    n_ev = nv - 1 - (1 if term in (TERM_BACKGROUND, TERM_BOX) else 0)
    ev = [Event.TOTAL_INTERNAL_REFLECTION if e == EV_TIR else Event.REFRACTION for e in events[:n_ev]]
    seg = np.linalg.norm(np.diff(verts, axis=0), axis=1)
    tau = np.concatenate([[0.0], np.cumsum(seg)])
    terminal = _TERMINALS[term]
    path = LightPath(verts, dirs, tau, ev, norms, terminal)
    if terminal in (Terminal.HIT_BACKGROUND, Terminal.HIT_BOUNDING_BOX):
        path.terminal_point = verts[-1]
    elif terminal is Terminal.ESCAPED:
        path.terminal_direction = dirs[-1]
    return path


def trace_reflection_path(ray: Ray, scene: Scene) -> LightPath:
    """Single mirror bounce at the first object hit; misses escape unchanged."""
    o, d = ray.origin, ray.direction
    to, tri, nx, ny, nz, front = K.object_hit(scene.object_kind, scene.sphere_params, scene.object_pack,
                                              o[0], o[1], o[2], d[0], d[1], d[2], scene.eps, K.INF)
    tb, btri, _, _ = K.bvh_nearest(scene.background_pack, o[0], o[1], o[2], d[0], d[1], d[2],
                                   scene.eps, K.INF)
    if to == K.INF or (btri >= 0 and tb <= to):
        return LightPath(o[None].copy(), d[None].copy(), np.zeros(1), [], None,
                         Terminal.ESCAPED, None, d.copy())
    p = o + to * d
    n = np.array([nx, ny, nz])
    r = d - 2.0 * (d @ n) * n
    r /= np.linalg.norm(r)
    return LightPath(np.stack([o, p]), np.stack([d, r]), np.array([0.0, to]), [Event.REFLECTION],
                     np.stack([np.zeros(3), n]), Terminal.ESCAPED, None, r)
