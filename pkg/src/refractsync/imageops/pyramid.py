"""Bilinear sampling, Laplacian pyramids and pyramid warping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..warpfield.field import WarpField
from .plane import ImageError, ImagePlane

KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
DEFAULT_LEVELS = 5


def bilinear_sample(img: np.ndarray, xs, ys, wrap_x: bool = False):
    """Sample ``img`` (H, W[, C]) at continuous pixel coordinates.

    Returns ``(values, valid)``. A sample is valid when all four neighbours lie
    inside the image; with ``wrap_x`` the horizontal axis is periodic and only
    the vertical extent is checked. Invalid samples are computed at the clamped
    coordinate so the output stays finite.
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[:2]
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    valid = np.isfinite(xs) & np.isfinite(ys) & (ys >= 0) & (ys <= h - 1)
    xs = np.nan_to_num(xs)
    ys = np.clip(np.nan_to_num(ys), 0, h - 1)
    if wrap_x:
        xs = np.mod(xs, w)
    else:
        valid &= (xs >= 0) & (xs <= w - 1)
        xs = np.clip(xs, 0, w - 1)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    if wrap_x:
        x0 = np.minimum(x0, w - 1)
        x1 = (x0 + 1) % w
    else:
        x0 = np.minimum(x0, max(w - 2, 0))
        x1 = np.minimum(x0 + 1, w - 1)
    y0 = np.minimum(y0, max(h - 2, 0))
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    if img.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bot * fy, valid


def _blur(a: np.ndarray, wrap_x: bool = False) -> np.ndarray:
    # 'mirror' in scipy is reflect-101
    a = ndimage.correlate1d(a, KERNEL, axis=0, mode="mirror")
    return ndimage.correlate1d(a, KERNEL, axis=1, mode="wrap" if wrap_x else "mirror")


def pyr_down(a: np.ndarray, wrap_x: bool = False) -> np.ndarray:
    return _blur(a, wrap_x)[::2, ::2]


def pyr_up(a: np.ndarray, shape: tuple[int, int], wrap_x: bool = False) -> np.ndarray:
    z = np.zeros(tuple(shape) + a.shape[2:])
    z[::2, ::2] = a
    return 4.0 * _blur(z, wrap_x)


def level_shapes(shape: tuple[int, int], levels: int) -> list[tuple[int, int]]:
    shapes = [tuple(shape)]
    for _ in range(levels - 1):
        h, w = shapes[-1]
        shapes.append(((h + 1) // 2, (w + 1) // 2))
    return shapes


@dataclass
class LaplacianPyramid:
    bands: list       # finest first
    base: np.ndarray  # low-pass residual
    wrap_x: bool = False

    @property
    def levels(self) -> int:
        return len(self.bands) + 1


def _check_levels(shape, levels: int) -> None:
    if levels < 1:
        raise ImageError("levels must be >= 1")
    need = 2 ** (levels - 1)
    if min(shape[:2]) < need:
        raise ImageError(f"image {shape[1]}x{shape[0]} too small for {levels} pyramid levels")


def build_pyramid(img, levels: int = DEFAULT_LEVELS, wrap_x: bool = False) -> LaplacianPyramid:
    a = img.data if isinstance(img, ImagePlane) else np.asarray(img, dtype=np.float64)
    _check_levels(a.shape, levels)
    bands = []
    cur = a
    for _ in range(levels - 1):
        down = pyr_down(cur, wrap_x)
        bands.append(cur - pyr_up(down, cur.shape[:2], wrap_x))
        cur = down
    return LaplacianPyramid(bands, cur, wrap_x)


def collapse_pyramid(pyr: LaplacianPyramid) -> np.ndarray:
    cur = pyr.base
    for band in reversed(pyr.bands):
        cur = band + pyr_up(cur, band.shape[:2], pyr.wrap_x)
    return cur


def pyramid_warp(img: ImagePlane, warp: WarpField, levels: int = DEFAULT_LEVELS,
                 target_wrap: bool = False):
    """Warp every Laplacian band at its own resolution, then collapse.

    Returns ``(ImagePlane, mask)``; the mask is the warp mask restricted to
    samples whose finest-level footprint lies inside the source. Set
    ``target_wrap`` when the target is a panorama so the collapse is periodic.
    """
    if (warp.source_height, warp.source_width) != img.shape:
        raise ImageError(f"warp expects a {warp.source_width}x{warp.source_height} source, "
                         f"got {img.width}x{img.height}")
    wrap = warp.source_space == "panorama"
    if warp.is_identity():
        return img.copy(), warp.mask.copy()
    coords = warp.filled_coords()
    _, valid = bilinear_sample(img.data[..., 0], coords[..., 0], coords[..., 1], wrap)
    mask = warp.mask & valid
    if levels == 1:
        out, _ = bilinear_sample(img.data, coords[..., 0], coords[..., 1], wrap)
        return ImagePlane(out, img.space), mask
    _check_levels(warp.mask.shape, levels)
    src = build_pyramid(img, levels, wrap)
    warped = []
    for k, band in enumerate(src.bands + [src.base]):
        step = 2 ** k
        c = coords[::step, ::step] / step
        warped.append(bilinear_sample(band, c[..., 0], c[..., 1], wrap)[0])
    out = collapse_pyramid(LaplacianPyramid(warped[:-1], warped[-1], target_wrap))
    return ImagePlane(out, img.space), mask
