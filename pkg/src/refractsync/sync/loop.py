"""Synchronized perspective/panorama generation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..geometry.camera import PanoCamera, PerspectiveCamera
from ..imageops.blend import blend_phi, fresnel_composite
from ..imageops.plane import ImageError, ImagePlane
from ..imageops.pyramid import pyramid_warp
from ..warpfield.compile import WarpBundle
from ..warpfield.field import WarpField
from .denoisers import DenoiserError, IdentityCodec, LatentCodec
from .sampler import NoiseSchedule, SamplerError, cfg_velocity, euler_estimate, guided_step, renoise

PERSP = 0
PANO = 1
_NAMES = ("persp", "pano")


@dataclass
class SyncConfig:
    steps: int = 20
    guidance: float = 3.5
    lam: float = 0.5
    pyramid_levels: int = 5
    tt_window: tuple = (0.2, 0.8)
    tt_length: int = 1
    repeats_main: int = 3
    repeats_pano: int = 1
    mode: str = "ode"
    seed: int = 0
    shift: float = 1.0

    def __post_init__(self):
        self.tt_window = tuple(float(x) for x in self.tt_window)
        self.mode = self.mode.lower()
        if self.steps < 1:
            raise SamplerError("steps must be >= 1")
        lo, hi = self.tt_window
        if not (0.0 <= lo <= 1.0 and 0.0 <= hi <= 1.0):
            raise SamplerError("time-travel window bounds must lie in [0, 1]")
        if self.repeats_main < 1 or self.repeats_pano < 1:
            raise SamplerError("repeat counts must be >= 1")
        if self.tt_length < 1:
            raise SamplerError("time-travel length must be >= 1")
        if self.mode not in ("ode", "sde"):
            raise SamplerError(f"unknown sampling mode {self.mode!r}")
        if not 0.0 <= self.lam <= 1.0:
            raise SamplerError("lambda must lie in [0, 1]")

    def in_window(self, k: int) -> bool:
        lo, hi = self.tt_window
        return lo * self.steps <= k < hi * self.steps

    def repeats(self, branch: int) -> int:
        return self.repeats_main if branch == PERSP else self.repeats_pano

    def schedule(self) -> NoiseSchedule:
        return NoiseSchedule.linear(self.steps, self.shift)


@dataclass
class SyncScene:
    warps: WarpBundle
    clean: ImagePlane  # object-free perspective image
    persp_cam: PerspectiveCamera
    pano_cam: PanoCamera

    def __post_init__(self):
        self.clean.require("linear")
        h, w = self.persp_cam.height, self.persp_cam.width
        ph, pw = self.pano_cam.height, self.pano_cam.width
        if self.clean.shape != (h, w):
            raise ImageError("clean image does not match the perspective camera")
        for name, f, tgt, src in (
            ("self_warp", self.warps.self_warp, (h, w), (h, w)),
            ("pano_to_persp_refraction", self.warps.pano_to_persp_refraction, (h, w), (ph, pw)),
            ("pano_to_persp_reflection", self.warps.pano_to_persp_reflection, (h, w), (ph, pw)),
            ("persp_to_pano", self.warps.persp_to_pano, (ph, pw), (h, w)),
        ):
            if f.mask.shape != tgt or (f.source_height, f.source_width) != src:
                raise ImageError(f"{name} has inconsistent dimensions")
        if self.warps.fresnel.weights.shape != (h, w):
            raise ImageError("Fresnel weights do not match the perspective camera")
        self.persp_identity = WarpField.identity(w, h, "perspective")
        self.pano_identity = WarpField.identity(pw, ph, "panorama")


def synchronize_views(persp: ImagePlane, pano: ImagePlane, scene: SyncScene, lam: float = 0.5,
                      levels: int = 5) -> tuple[ImagePlane, ImagePlane]:
    """Cross-warp the two clean estimates and merge them with the object-free image."""
    persp.require("linear")
    pano.require("linear")
    if persp.shape != scene.clean.shape or pano.shape != (scene.pano_cam.height, scene.pano_cam.width):
        raise ImageError("estimates do not match the scene dimensions")
    w = scene.warps
    refr = blend_phi([persp, pano, scene.clean],
                     [scene.persp_identity, w.pano_to_persp_refraction, w.self_warp], lam, levels)
    refl, _ = pyramid_warp(pano, w.pano_to_persp_reflection, levels)
    out_persp = fresnel_composite(refr, refl, w.fresnel)
    out_persp.meta.update(refr.meta)
    out_pano = blend_phi([pano, persp, scene.clean],
                         [scene.pano_identity, w.persp_to_pano, w.persp_to_pano], lam, levels,
                         target_wrap=True)
    return out_persp, out_pano


@dataclass
class Branch:
    """One view's denoiser with its conditional and unconditional tokens."""

    denoiser: object
    condition: Optional[bytes] = None
    uncondition: Optional[bytes] = None
    codec: LatentCodec = field(default_factory=IdentityCodec)

    def velocity(self, z, sigma, omega, step):
        vc = self._call(z, sigma, self.condition, step)
        if omega == 0:
            return vc
        return cfg_velocity(vc, self._call(z, sigma, self.uncondition, step), omega)

    def _call(self, z, sigma, cond, step):
        try:
            v = np.asarray(self.denoiser(z, sigma, cond), dtype=np.float64)
        except DenoiserError as exc:
            raise type(exc)(f"step {step}: {exc}") from exc
        if v.shape != z.shape:
            raise DenoiserError(f"step {step}: denoiser returned shape {v.shape}, expected {z.shape}")
        if not np.all(np.isfinite(v)):
            raise DenoiserError(f"step {step}: denoiser returned non-finite values")
        return v


@dataclass
class GenerationResult:
    perspective: ImagePlane
    panorama: ImagePlane
    trace: list


def _rms(a, b) -> float:
    return float(np.sqrt(np.mean((a - b) ** 2)))


def run_generation(config: SyncConfig, scene: SyncScene, persp: Branch, pano: Branch,
                   schedule: Optional[NoiseSchedule] = None, seed: Optional[int] = None) -> GenerationResult:
    """Two-branch flow-matching sampler synchronized at every step, with time travel.

    Inside the window each branch repeats the step ``repeats`` times in total:
    after a pass it is renoised ``tt_length`` steps back and re-denoised. A
    branch that is not travelling keeps its latent and contributes its
    estimate at its own noise level.
    """
    sched = config.schedule() if schedule is None else schedule
    sig = sched.sigmas
    T = sched.steps
    seq = np.random.SeedSequence(config.seed if seed is None else seed)
    init_rng, *noise_rngs = [np.random.default_rng(s) for s in seq.spawn(3)]
    branches = (persp, pano)
    shapes = ((scene.persp_cam.height, scene.persp_cam.width, 3),
              (scene.pano_cam.height, scene.pano_cam.width, 3))
    z = [init_rng.standard_normal(shapes[PERSP]), init_rng.standard_normal(shapes[PANO])]
    idx = [0, 0]
    trace = []
    last = [None, None]

    def step(k, active, tt):
        est = []
        for b in (PERSP, PANO):
            s = sig[idx[b]]
            if s == 0:
                est.append(branches[b].codec.decode(z[b]))
                continue
            v = branches[b].velocity(z[b], s, config.guidance, k)
            est.append(branches[b].codec.decode(euler_estimate(z[b], v, s)))
        synced = synchronize_views(est[PERSP], est[PANO], scene, config.lam, config.pyramid_levels)
        res = []
        for b in (PERSP, PANO):
            res.append(_rms(synced[b].data, est[b].data))
            if b not in active:
                continue
            zh = branches[b].codec.encode(synced[b])
            s, s_next = sig[idx[b]], sig[idx[b] + 1]
            z[b] = guided_step(z[b], zh, s, s_next)
            if config.mode == "sde" and s_next > 0:
                z[b] = z[b] + (s - s_next) * noise_rngs[b].standard_normal(z[b].shape)
            idx[b] += 1
            last[b] = synced[b]
        trace.append(f"step={k} sigma={sig[k]:.6f} res_persp={res[0]:.6e} res_pano={res[1]:.6e} tt={tt}")

    for k in range(T):
        step(k, (PERSP, PANO), 0)
        if not config.in_window(k):
            continue
        for r in range(1, max(config.repeats_main, config.repeats_pano)):
            travel = [b for b in (PERSP, PANO) if r < config.repeats(b)]
            back = max(0, k + 1 - config.tt_length)
            for b in travel:
                z[b] = renoise(z[b], sig[k + 1], sig[back], noise_rngs[b])
                idx[b] = back
            while idx[travel[0]] < k + 1:
                step(idx[travel[0]], travel, r)

    out = [branches[b].codec.decode(z[b]) for b in (PERSP, PANO)]
    return GenerationResult(out[PERSP], out[PANO], trace)
