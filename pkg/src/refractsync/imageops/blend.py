"""Occlusion-masked value-weighted blending and Fresnel compositing."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..warpfield.field import FresnelWeightMap, WarpField
from .plane import ImageError, ImagePlane
from .pyramid import DEFAULT_LEVELS, pyramid_warp

DEFAULT_LAMBDA = 0.5


def blend_warped(values: Sequence[np.ndarray], masks: Sequence[np.ndarray], lam: float,
                 fallback: Optional[np.ndarray] = None) -> tuple[np.ndarray, int]:
    """Blend already-warped (H, W, 3) arrays. Returns the result and the count of uncovered pixels.

    Uncovered pixels (no valid source) take ``fallback``, or zero without one.
    """
    if not 0.0 <= lam <= 1.0:
        raise ImageError("lambda must lie in [0, 1]")
    if len(values) == 0 or len(values) != len(masks):
        raise ImageError("need equally many (non-zero) images and masks")
    shape = values[0].shape
    num = np.zeros(shape)
    cnt = np.zeros(shape[:2])
    vnum = np.zeros(shape)
    vden = np.zeros(shape)
    for v, m in zip(values, masks):
        if v.shape != shape or m.shape != shape[:2]:
            raise ImageError("warped images must share target dimensions")
        mf = m.astype(np.float64)
        num += mf[..., None] * v
        cnt += mf
        a = mf[..., None] * np.abs(v)
        vnum += a * v
        vden += a
    covered = cnt > 0
    safe = np.where(covered, cnt, 1.0)[..., None]
    mean = num / safe
    with np.errstate(divide="ignore", invalid="ignore"):
        weighted = np.where(vden > 0, vnum / np.where(vden > 0, vden, 1.0), mean)
    out = (1.0 - lam) * mean + lam * weighted
    uncovered = ~covered
    out[uncovered] = 0.0 if fallback is None else fallback[uncovered]
    return out, int(uncovered.sum())


def blend_phi(images: Sequence[ImagePlane], warps: Sequence[WarpField], lam: float = DEFAULT_LAMBDA,
              levels: int = DEFAULT_LEVELS, target_wrap: bool = False) -> ImagePlane:
    """Pyramid-warp each image by its warp and merge with the masked blend.

    Pixels no source covers keep the first image's un-warped value; their
    count is recorded in ``meta["uncovered_pixels"]``.
    """
    if len(images) == 0 or len(images) != len(warps):
        raise ImageError("need equally many (non-zero) images and warps")
    if not 0.0 <= lam <= 1.0:
        raise ImageError("lambda must lie in [0, 1]")
    for img in images:
        img.require("linear")
    vals, masks = [], []
    for img, warp in zip(images, warps):
        out, m = pyramid_warp(img, warp, levels, target_wrap)
        vals.append(out.data)
        masks.append(m)
    first = images[0].data
    fallback = first if first.shape == vals[0].shape else None
    data, n = blend_warped(vals, masks, lam, fallback)
    return ImagePlane(data, "linear", {"uncovered_pixels": n})


def fresnel_composite(refracted: ImagePlane, reflected: ImagePlane,
                      weights: FresnelWeightMap) -> ImagePlane:
    """``w * reflected + (1 - w) * refracted``; w = 0 passes ``refracted`` through unchanged."""
    refracted.require("linear")
    reflected.require("linear")
    w = weights.weights
    if refracted.shape != reflected.shape or w.shape != refracted.shape:
        raise ImageError("composite inputs must share dimensions")
    out = refracted.data.copy()
    on = w > 0
    wv = w[on][:, None]
    out[on] = wv * reflected.data[on] + (1.0 - wv) * refracted.data[on]
    return ImagePlane(out, "linear", dict(refracted.meta))
