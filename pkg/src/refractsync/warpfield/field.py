"""Warp fields, Fresnel weight maps and their on-disk format.

SNWF layout (all little-endian)::

    4 bytes   magic "SNWF"
    u16       version (1)
    u32 x 4   target width, target height, source width, source height
    u8        source space (0 = perspective, 1 = panorama)
    f32 x 2WH row-major (x, y) source coordinates
    bytes     row-major mask, np.packbits(bitorder="little"), ceil(W*H/8) bytes
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import ndimage

from .. import fileio

MAGIC = b"SNWF"
VERSION = 1
SPACES = ("perspective", "panorama")
_HEADER = struct.Struct("<4sHIIIIB")


class WarpFormatError(ValueError):
    pass


@dataclass
class WarpField:
    """Per-target-pixel continuous source coordinates plus validity mask."""

    coords: np.ndarray  # (H, W, 2) as (x, y)
    mask: np.ndarray    # (H, W) bool
    source_width: int
    source_height: int
    source_space: str = "perspective"
    _filled: Optional[np.ndarray] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.coords.shape != self.mask.shape + (2,):
            raise WarpFormatError("coords must be (H, W, 2) matching the mask")
        if self.source_space not in SPACES:
            raise WarpFormatError(f"unknown source space {self.source_space!r}")

    @property
    def target_height(self) -> int:
        return self.mask.shape[0]

    @property
    def target_width(self) -> int:
        return self.mask.shape[1]

    @classmethod
    def identity(cls, width: int, height: int, space: str = "perspective") -> "WarpField":
        ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
        return cls(np.stack([xs, ys], axis=-1), np.ones((height, width), bool), width, height, space)

    @classmethod
    def empty(cls, width: int, height: int, source_width: int, source_height: int,
              space: str = "perspective") -> "WarpField":
        return cls(np.zeros((height, width, 2)), np.zeros((height, width), bool),
                   source_width, source_height, space)

    def is_identity(self) -> bool:
        if (self.source_width, self.source_height) != (self.target_width, self.target_height):
            return False
        ys, xs = np.mgrid[0:self.target_height, 0:self.target_width]
        return bool(self.mask.all() and np.array_equal(self.coords[..., 0], xs)
                    and np.array_equal(self.coords[..., 1], ys))

    def filled_coords(self) -> np.ndarray:
        """Coordinates with masked-out pixels copied from the nearest valid pixel.

        Coarse pyramid levels sample masked-out pixels too; filling keeps them
        from pulling in unrelated content across mask edges.
        """
        if self._filled is None:
            if self.mask.all() or not self.mask.any():
                self._filled = self.coords
            else:
                _, (iy, ix) = ndimage.distance_transform_edt(~self.mask, return_indices=True)
                self._filled = self.coords[iy, ix]
        return self._filled

    def restricted(self, keep: np.ndarray) -> "WarpField":
        return WarpField(self.coords, self.mask & keep, self.source_width, self.source_height,
                         self.source_space)

    def save(self, path) -> None:
        h, w = self.mask.shape
        header = _HEADER.pack(MAGIC, VERSION, w, h, self.source_width, self.source_height,
                              SPACES.index(self.source_space))
        coords = np.ascontiguousarray(self.coords, dtype="<f4").tobytes()
        bits = np.packbits(self.mask.ravel(), bitorder="little").tobytes()
        Path(path).write_bytes(header + coords + bits)

    @classmethod
    def load(cls, path) -> "WarpField":
        data = Path(path).read_bytes()
        if len(data) < _HEADER.size:
            raise WarpFormatError(f"{path}: truncated header")
        magic, version, w, h, sw, sh, space = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise WarpFormatError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise WarpFormatError(f"{path}: unsupported version {version}")
        if space >= len(SPACES):
            raise WarpFormatError(f"{path}: bad source space {space}")
        n = w * h
        off = _HEADER.size
        expected = off + 8 * n + (n + 7) // 8
        if len(data) != expected:
            raise WarpFormatError(f"{path}: expected {expected} bytes, found {len(data)}")
        coords = np.frombuffer(data, "<f4", 2 * n, off).reshape(h, w, 2).astype(np.float64)
        bits = np.frombuffer(data, np.uint8, (n + 7) // 8, off + 8 * n)
        mask = np.unpackbits(bits, count=n, bitorder="little").astype(bool).reshape(h, w)
        return cls(coords, mask, sw, sh, SPACES[space])


@dataclass
class FresnelWeightMap:
    """Per-pixel reflectance ``(R_p + R_s) / 2``, zero off the object."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError("weights must be 2-D")
        if np.any(self.weights < 0) or np.any(self.weights > 1):
            raise ValueError("Fresnel weights must lie in [0, 1]")

    def save(self, path) -> None:
        fileio.write_pfm(path, self.weights)

    @classmethod
    def load(cls, path) -> "FresnelWeightMap":
        return cls(np.clip(fileio.read_pfm(path), 0.0, 1.0))
