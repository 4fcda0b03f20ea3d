"""PFM, PNG and Wavefront OBJ readers/writers."""

from __future__ import annotations

import os
import re
from pathlib import Path

import cv2
import numpy as np


class FormatError(ValueError):
    pass


def _require(path) -> Path:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return path


def read_pfm(path) -> np.ndarray:
    """Float image, top row first; (H, W) for 'Pf', (H, W, 3) for 'PF'."""
    data = _require(path).read_bytes()
    m = re.match(rb"(PF|Pf)\s+(\d+)\s+(\d+)\s+(\S+)\s", data)
    if m is None:
        raise FormatError(f"{path}: not a PFM file")
    channels = 3 if m.group(1) == b"PF" else 1
    w, h = int(m.group(2)), int(m.group(3))
    scale = float(m.group(4))
    dtype = "<f4" if scale < 0 else ">f4"
    n = w * h * channels
    arr = np.frombuffer(data, dtype=dtype, count=n, offset=m.end())
    arr = arr.reshape(h, w, channels) if channels == 3 else arr.reshape(h, w)
    return np.flipud(arr).astype(np.float64)


def write_pfm(path, image: np.ndarray) -> None:
    """Little-endian PFM (scale -1.0)."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3 and image.shape[2] == 1:
        image = image[..., 0]
    if image.ndim == 2:
        header = b"Pf"
    elif image.ndim == 3 and image.shape[2] == 3:
        header = b"PF"
    else:
        raise FormatError("PFM holds 1 or 3 channels")
    h, w = image.shape[:2]
    body = np.ascontiguousarray(np.flipud(image).astype("<f4")).tobytes()
    Path(path).write_bytes(header + f"\n{w} {h}\n-1.0\n".encode() + body)


def read_png(path) -> np.ndarray:
    """RGB(or gray) PNG scaled to [0, 1] as float64."""
    img = cv2.imread(str(_require(path)), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise FormatError(f"{path}: unreadable image")
    scale = 65535.0 if img.dtype == np.uint16 else 255.0
    img = img.astype(np.float64) / scale
    if img.ndim == 3:
        img = img[..., :3][..., ::-1]
    return np.ascontiguousarray(img)


def read_png_raw(path) -> np.ndarray:
    img = cv2.imread(str(_require(path)), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise FormatError(f"{path}: unreadable image")
    return img


def write_png(path, image: np.ndarray, bits: int = 8) -> None:
    if bits not in (8, 16):
        raise FormatError("PNG bit depth must be 8 or 16")
    top = 255 if bits == 8 else 65535
    img = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    q = np.round(img * top).astype(np.uint8 if bits == 8 else np.uint16)
    if q.ndim == 3:
        q = q[..., ::-1]
    if not cv2.imwrite(os.fspath(path), q):
        raise FormatError(f"{path}: failed to write PNG")


def read_obj(path) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Vertices, triangles and optional per-vertex normals from the v/vn/f subset.

    Polygons are fan-triangulated. Normals referenced through ``f v//vn``
    are averaged onto their vertices.
    """
    verts, normals, faces, face_norms = [], [], [], []
    for line in _require(path).read_text().splitlines():
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "vn":
            normals.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            vi, ni = [], []
            for tok in parts[1:]:
                fields = tok.split("/")
                vi.append(_obj_index(fields[0], len(verts)))
                if len(fields) >= 3 and fields[2]:
                    ni.append(_obj_index(fields[2], len(normals)))
            for k in range(1, len(vi) - 1):
                faces.append((vi[0], vi[k], vi[k + 1]))
                if len(ni) == len(vi):
                    face_norms.append((ni[0], ni[k], ni[k + 1]))
    if not verts or not faces:
        raise FormatError(f"{path}: no geometry")
    v = np.asarray(verts, dtype=np.float64)
    f = np.asarray(faces, dtype=np.int64)
    vn = None
    if normals and len(face_norms) == len(faces):
        nrm = np.asarray(normals, dtype=np.float64)
        acc = np.zeros_like(v)
        np.add.at(acc, f.ravel(), nrm[np.asarray(face_norms).ravel()])
        length = np.linalg.norm(acc, axis=1)
        if np.all(length > 0):
            vn = acc / length[:, None]
    return v, f, vn


def _obj_index(tok: str, n: int) -> int:
    i = int(tok)
    return i - 1 if i > 0 else n + i


def write_obj(path, vertices, triangles, normals=None) -> None:
    lines = [f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in vertices]
    if normals is not None:
        lines += [f"vn {x:.9g} {y:.9g} {z:.9g}" for x, y, z in normals]
        lines += [f"f {a+1}//{a+1} {b+1}//{b+1} {c+1}//{c+1}" for a, b, c in triangles]
    else:
        lines += [f"f {a+1} {b+1} {c+1}" for a, b, c in triangles]
    Path(path).write_text("\n".join(lines) + "\n")
