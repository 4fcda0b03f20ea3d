"""Ray-traced compilation of the four warp fields and the Fresnel weights.

Perspective pixels are traced once; the same path yields the self-warp, the
panorama-to-perspective refraction warp, the reflection warp and the Fresnel
weight. Panorama pixels are traced separately for the perspective-to-panorama
warp.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numba
import numpy as np
from numba import njit, prange

from ..geometry import _kernels as K
from ..geometry.camera import PanoCamera, PerspectiveCamera
from ..geometry.scene import Scene
from ..optics import (DEFAULT_MAX_EVENTS, TERM_ABSORBED, TERM_BACKGROUND, TERM_BOX, fresnel_kernel,
                      trace_kernel)
from .field import FresnelWeightMap, WarpField

VISIBILITY_TOLERANCE = 1e-3


@njit(cache=True, inline="always")
def _pano_uv(dx, dy, dz, pw, ph):
    ln = math.sqrt(dx * dx + dy * dy + dz * dz)
    dx /= ln
    dy /= ln
    dz /= ln
    u = (math.atan2(dx, -dz) / (2.0 * math.pi) + 0.5) * pw
    if u >= pw:
        u -= pw
    v = (0.5 - math.asin(min(1.0, max(-1.0, dy))) / math.pi) * ph
    return u, v


@njit(cache=True, inline="always")
def _project(cam, R, C, px, py, pz):
    """Perspective projection of a world point: (x, y, in_front)."""
    rx, ry, rz = px - C[0], py - C[1], pz - C[2]
    xc = R[0, 0] * rx + R[1, 0] * ry + R[2, 0] * rz
    yc = R[0, 1] * rx + R[1, 1] * ry + R[2, 1] * rz
    zc = R[0, 2] * rx + R[1, 2] * ry + R[2, 2] * rz
    if zc <= 0.0:
        return 0.0, 0.0, False
    return cam[0] * xc / zc + cam[2], cam[1] * yc / zc + cam[3], True


@njit(cache=True, inline="always")
def _in_image(cam, x, y):
    return x >= 0.0 and x <= cam[4] - 1.0 and y >= 0.0 and y <= cam[5] - 1.0


@njit(parallel=True, cache=True)
def _persp_kernel(kind, sph, obj, bg, nu, eps, max_events, box_lo, box_hi, cam, R, C, pc, pw, ph,
                  self_xy, self_m, refr_xy, refr_m, refl_xy, refl_m, fres, on_obj):
    h, w = self_m.shape
    for i in prange(h):
        verts = np.empty((max_events + 2, 3))
        dirs = np.empty((max_events + 2, 3))
        norms = np.empty((max_events + 2, 3))
        events = np.empty(max_events + 1, np.int64)
        for j in range(w):
            xc = (j - cam[2]) / cam[0]
            yc = (i - cam[3]) / cam[1]
            ln = math.sqrt(xc * xc + yc * yc + 1.0)
            xc /= ln
            yc /= ln
            zc = 1.0 / ln
            dx = R[0, 0] * xc + R[0, 1] * yc + R[0, 2] * zc
            dy = R[1, 0] * xc + R[1, 1] * yc + R[1, 2] * zc
            dz = R[2, 0] * xc + R[2, 1] * yc + R[2, 2] * zc
            nv, term = trace_kernel(kind, sph, obj, bg, nu, C[0], C[1], C[2], dx, dy, dz, eps,
                                    max_events, True, box_lo, box_hi, verts, dirs, norms, events)
            n_ev = nv - 1
            if term == TERM_BACKGROUND or term == TERM_BOX:
                n_ev -= 1
            hit = n_ev > 0 or term == TERM_ABSORBED
            on_obj[i, j] = hit
            last = nv - 1
            # self-warp
            if not hit:
                self_xy[i, j, 0] = j
                self_xy[i, j, 1] = i
                self_m[i, j] = True
            elif term == TERM_BACKGROUND:
                x, y, front = _project(cam, R, C, verts[last, 0], verts[last, 1], verts[last, 2])
                self_xy[i, j, 0] = x
                self_xy[i, j, 1] = y
                self_m[i, j] = front and _in_image(cam, x, y)
            else:
                self_xy[i, j, 0] = 0.0
                self_xy[i, j, 1] = 0.0
                self_m[i, j] = False
            # panorama -> perspective, refraction component
            if term == TERM_BACKGROUND or term == TERM_BOX:
                u, v = _pano_uv(verts[last, 0] - pc[0], verts[last, 1] - pc[1], verts[last, 2] - pc[2], pw, ph)
                refr_xy[i, j, 0] = u
                refr_xy[i, j, 1] = v
                refr_m[i, j] = True
            else:
                refr_xy[i, j, 0] = 0.0
                refr_xy[i, j, 1] = 0.0
                refr_m[i, j] = False
            # reflection component and Fresnel weight at the entry interface
            if hit:
                nx, ny, nz = norms[1, 0], norms[1, 1], norms[1, 2]
                c = 2.0 * (dx * nx + dy * ny + dz * nz)
                u, v = _pano_uv(dx - c * nx, dy - c * ny, dz - c * nz, pw, ph)
                refl_xy[i, j, 0] = u
                refl_xy[i, j, 1] = v
                refl_m[i, j] = True
                rp, rs = fresnel_kernel(dx, dy, dz, nx, ny, nz, 1.0, nu)
                fres[i, j] = 0.5 * (rp + rs)
            else:
                refl_xy[i, j, 0] = 0.0
                refl_xy[i, j, 1] = 0.0
                refl_m[i, j] = False
                fres[i, j] = 0.0


@njit(parallel=True, cache=True)
def _pano_kernel(kind, sph, obj, bg, eps, tol, cam, R, C, pc, out_xy, out_m):
    ph, pw = out_m.shape
    for i in prange(ph):
        lat = (0.5 - i / ph) * math.pi
        cl = math.cos(lat)
        sl = math.sin(lat)
        for j in range(pw):
            lon = (j / pw - 0.5) * 2.0 * math.pi
            dx = math.sin(lon) * cl
            dy = sl
            dz = -math.cos(lon) * cl
            tb, btri, bu, bv = K.bvh_nearest(bg, pc[0], pc[1], pc[2], dx, dy, dz, eps, K.INF)
            if btri >= 0:
                px, py, pz = pc[0] + tb * dx, pc[1] + tb * dy, pc[2] + tb * dz
                x, y, front = _project(cam, R, C, px, py, pz)
                ok = front and _in_image(cam, x, y)
                if ok:
                    rx, ry, rz = px - C[0], py - C[1], pz - C[2]
                    dist = math.sqrt(rx * rx + ry * ry + rz * rz)
                    rx /= dist
                    ry /= dist
                    rz /= dist
                    reach = dist * (1.0 - tol)
                    if K.bvh_any(bg, C[0], C[1], C[2], rx, ry, rz, eps, reach):
                        ok = False
                    else:
                        to = K.object_hit(kind, sph, obj, C[0], C[1], C[2], rx, ry, rz, eps, reach)[0]
                        ok = to == K.INF
            else:
                x, y, front = _project(cam, R, C, C[0] + dx, C[1] + dy, C[2] + dz)
                ok = front and _in_image(cam, x, y)
                if ok:
                    if K.bvh_any(bg, C[0], C[1], C[2], dx, dy, dz, eps, K.INF):
                        ok = False
                    else:
                        to = K.object_hit(kind, sph, obj, C[0], C[1], C[2], dx, dy, dz, eps, K.INF)[0]
                        ok = to == K.INF
            out_xy[i, j, 0] = x
            out_xy[i, j, 1] = y
            out_m[i, j] = ok


@contextmanager
def _threads(n: Optional[int]):
    if n is None:
        yield
        return
    old = numba.get_num_threads()
    # numba cannot exceed the pool size fixed at import (NUMBA_NUM_THREADS)
    numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))
    try:
        yield
    finally:
        numba.set_num_threads(old)


@dataclass
class PerspectiveTrace:
    self_warp: WarpField
    refraction: WarpField
    reflection: WarpField
    fresnel: FresnelWeightMap
    object_mask: np.ndarray


def trace_perspective(cam: PerspectiveCamera, scene: Scene, pano: Optional[PanoCamera] = None,
                      max_events: int = DEFAULT_MAX_EVENTS, threads: Optional[int] = None) -> PerspectiveTrace:
    if max_events < 2:
        raise ValueError("max_events must be at least 2")
    if pano is None:
        pano = PanoCamera.with_height(_object_center(scene), 2)
    h, w = cam.height, cam.width
    box_lo, box_hi = scene.bounding_box(cam.center, pano.center)
    self_xy = np.empty((h, w, 2))
    refr_xy = np.empty((h, w, 2))
    refl_xy = np.empty((h, w, 2))
    self_m = np.empty((h, w), bool)
    refr_m = np.empty((h, w), bool)
    refl_m = np.empty((h, w), bool)
    fres = np.empty((h, w))
    on_obj = np.empty((h, w), bool)
    with _threads(threads):
        _persp_kernel(scene.object_kind, scene.sphere_params, scene.object_pack, scene.background_pack,
                      scene.refractive_index, scene.eps, max_events, box_lo, box_hi,
                      cam.params, np.ascontiguousarray(cam.rotation), np.ascontiguousarray(cam.center),
                      pano.center, pano.width, pano.height,
                      self_xy, self_m, refr_xy, refr_m, refl_xy, refl_m, fres, on_obj)
    return PerspectiveTrace(
        WarpField(self_xy, self_m, w, h, "perspective"),
        WarpField(refr_xy, refr_m, pano.width, pano.height, "panorama"),
        WarpField(refl_xy, refl_m, pano.width, pano.height, "panorama"),
        FresnelWeightMap(np.clip(fres, 0.0, 1.0)),
        on_obj,
    )


def _object_center(scene: Scene) -> np.ndarray:
    if scene.object is None:
        lo, hi = scene.bounds()
    else:
        lo, hi = scene.object.bounds()
    return 0.5 * (lo + hi)


def compute_self_warp(cam: PerspectiveCamera, scene: Scene, max_events: int = DEFAULT_MAX_EVENTS,
                      threads: Optional[int] = None) -> WarpField:
    """Perspective-to-perspective warp showing the background through the object."""
    return trace_perspective(cam, scene, None, max_events, threads).self_warp


def compute_pano_to_persp_refraction(cam: PerspectiveCamera, pano: PanoCamera, scene: Scene,
                                     max_events: int = DEFAULT_MAX_EVENTS,
                                     restrict_to_object: bool = False,
                                     threads: Optional[int] = None) -> WarpField:
    tr = trace_perspective(cam, scene, pano, max_events, threads)
    return tr.refraction.restricted(tr.object_mask) if restrict_to_object else tr.refraction


def compute_pano_to_persp_reflection(cam: PerspectiveCamera, pano: PanoCamera, scene: Scene,
                                     threads: Optional[int] = None) -> WarpField:
    return trace_perspective(cam, scene, pano, DEFAULT_MAX_EVENTS, threads).reflection


def compute_fresnel_weights(cam: PerspectiveCamera, scene: Scene,
                            threads: Optional[int] = None) -> FresnelWeightMap:
    return trace_perspective(cam, scene, None, DEFAULT_MAX_EVENTS, threads).fresnel


def compute_persp_to_pano(pano: PanoCamera, cam: PerspectiveCamera, scene: Scene,
                          threads: Optional[int] = None) -> WarpField:
    """Panorama-to-perspective lookup for warping the perspective view into the panorama.

    Directions hidden from the perspective camera (behind it, outside its
    frustum, or occluded by background or object) are masked out.
    """
    xy = np.empty((pano.height, pano.width, 2))
    m = np.empty((pano.height, pano.width), bool)
    with _threads(threads):
        _pano_kernel(scene.object_kind, scene.sphere_params, scene.object_pack, scene.background_pack,
                     scene.eps, VISIBILITY_TOLERANCE, cam.params, np.ascontiguousarray(cam.rotation),
                     np.ascontiguousarray(cam.center), pano.center, xy, m)
    return WarpField(xy, m, cam.width, cam.height, "perspective")


@dataclass
class WarpBundle:
    """Everything the synchronized sampler needs from ray tracing."""

    self_warp: WarpField
    pano_to_persp_refraction: WarpField
    pano_to_persp_reflection: WarpField
    persp_to_pano: WarpField
    fresnel: FresnelWeightMap
    object_mask: np.ndarray

    FILES = {
        "self_warp": "self_refraction.snwf",
        "pano_to_persp_refraction": "pano_to_persp_refraction.snwf",
        "pano_to_persp_reflection": "pano_to_persp_reflection.snwf",
        "persp_to_pano": "persp_to_pano.snwf",
    }

    def save(self, directory) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for attr, name in self.FILES.items():
            getattr(self, attr).save(directory / name)
            written.append(directory / name)
        self.fresnel.save(directory / "fresnel_weights.pfm")
        WarpField(np.zeros(self.object_mask.shape + (2,)), self.object_mask,
                  self.object_mask.shape[1], self.object_mask.shape[0]).save(directory / "object_mask.snwf")
        written += [directory / "fresnel_weights.pfm", directory / "object_mask.snwf"]
        return written

    @classmethod
    def load(cls, directory) -> "WarpBundle":
        directory = Path(directory)
        fields = {attr: WarpField.load(directory / name) for attr, name in cls.FILES.items()}
        obj = WarpField.load(directory / "object_mask.snwf").mask
        return cls(fresnel=FresnelWeightMap.load(directory / "fresnel_weights.pfm"), object_mask=obj, **fields)


def compile_warps(cam: PerspectiveCamera, pano: PanoCamera, scene: Scene,
                  max_events: int = DEFAULT_MAX_EVENTS, restrict_refraction_to_object: bool = False,
                  threads: Optional[int] = None) -> WarpBundle:
    tr = trace_perspective(cam, scene, pano, max_events, threads)
    refr = tr.refraction.restricted(tr.object_mask) if restrict_refraction_to_object else tr.refraction
    return WarpBundle(tr.self_warp, refr, tr.reflection, compute_persp_to_pano(pano, cam, scene, threads),
                      tr.fresnel, tr.object_mask)
