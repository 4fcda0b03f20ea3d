"""Image container, colour-space conversion and image file I/O."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import fileio

SPACES = ("linear", "sRGB")

# IEC 61966-2-1
_A = 0.055
_GAMMA = 2.4
_PHI = 12.92
_LIN_CUT = 0.0031308
_ENC_CUT = 0.04045


class ImageError(ValueError):
    pass


@dataclass
class ImagePlane:
    """An (H, W, 3) float image tagged with its colour space."""

    data: np.ndarray
    space: str = "linear"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim == 2:
            a = np.repeat(a[..., None], 3, axis=2)
        if a.ndim != 3 or a.shape[2] != 3:
            raise ImageError(f"expected an (H, W, 3) image, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ImageError("image samples must be finite")
        if self.space not in SPACES:
            raise ImageError(f"unknown colour space {self.space!r}")
        self.data = a

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 3

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]

    def require(self, space: str) -> None:
        if self.space != space:
            raise ImageError(f"expected a {space} image, got {self.space}")

    def copy(self) -> "ImagePlane":
        return ImagePlane(self.data.copy(), self.space, dict(self.meta))


def _encode(x: np.ndarray) -> np.ndarray:
    x = np.maximum(x, 0.0)
    return np.where(x <= _LIN_CUT, _PHI * x, (1 + _A) * np.power(x, 1 / _GAMMA) - _A)


def _decode(x: np.ndarray) -> np.ndarray:
    x = np.maximum(x, 0.0)
    return np.where(x <= _ENC_CUT, x / _PHI, np.power((x + _A) / (1 + _A), _GAMMA))


def linear_to_srgb(img: ImagePlane) -> ImagePlane:
    img.require("linear")
    return ImagePlane(_encode(img.data), "sRGB", dict(img.meta))


def srgb_to_linear(img: ImagePlane) -> ImagePlane:
    img.require("sRGB")
    return ImagePlane(_decode(img.data), "linear", dict(img.meta))


def load_image(path) -> ImagePlane:
    """PNG files are sRGB-encoded, PFM files are linear."""
    path = Path(path)
    if path.suffix.lower() == ".pfm":
        a = fileio.read_pfm(path)
        return ImagePlane(a, "linear")
    return ImagePlane(fileio.read_png(path), "sRGB")


def load_linear(path) -> ImagePlane:
    img = load_image(path)
    return img if img.space == "linear" else srgb_to_linear(img)


def save_image(path, img: ImagePlane, bits: int = 8) -> None:
    """PNG output is encoded to sRGB; PFM output stays linear."""
    path = Path(path)
    if path.suffix.lower() == ".pfm":
        img.require("linear")
        fileio.write_pfm(path, img.data)
        return
    enc = img if img.space == "sRGB" else linear_to_srgb(img)
    fileio.write_png(path, np.clip(enc.data, 0.0, 1.0), bits=bits)
