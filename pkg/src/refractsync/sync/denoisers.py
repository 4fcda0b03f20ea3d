"""Denoiser and codec interfaces, the oracle denoiser and the external plug-in protocol.

Plug-in wire format (little-endian). Request::

    4s   b"SNDQ"
    f64  sigma
    i32  condition length, -1 for the unconditional call
    ...  condition bytes
    u32  ndim, then u32 per dimension
    f32  latent samples, row-major

Response::

    4s   b"SNDR"
    u32  ndim, then u32 per dimension
    f32  velocity samples
"""

from __future__ import annotations

import struct
import subprocess
from typing import Optional, Protocol, Sequence

import numpy as np

from ..imageops.plane import ImagePlane

REQUEST_MAGIC = b"SNDQ"
RESPONSE_MAGIC = b"SNDR"


class DenoiserError(RuntimeError):
    pass


class PluginError(DenoiserError):
    pass


class Denoiser(Protocol):
    def __call__(self, z: np.ndarray, sigma: float, condition: Optional[bytes]) -> np.ndarray: ...


class LatentCodec(Protocol):
    def encode(self, img: ImagePlane) -> np.ndarray: ...

    def decode(self, z: np.ndarray) -> ImagePlane: ...


class IdentityCodec:
    """Latent is the linear pixel array itself."""

    def encode(self, img: ImagePlane) -> np.ndarray:
        img.require("linear")
        return img.data.copy()

    def decode(self, z: np.ndarray) -> ImagePlane:
        return ImagePlane(np.array(z, dtype=np.float64), "linear")


class OracleDenoiser:
    """Velocity pointing straight at a known clean target: ``(z - target) / sigma``."""

    def __init__(self, target: np.ndarray):
        self.target = np.asarray(target, dtype=np.float64)

    def __call__(self, z, sigma, condition=None):
        if sigma <= 0:
            raise DenoiserError("oracle velocity is undefined at sigma = 0")
        return (np.asarray(z) - self.target) / sigma


class ZeroDenoiser:
    def __call__(self, z, sigma, condition=None):
        return np.zeros_like(np.asarray(z, dtype=np.float64))


def pack_tensor(a: np.ndarray) -> bytes:
    a = np.ascontiguousarray(a, dtype="<f4")
    return struct.pack(f"<I{a.ndim}I", a.ndim, *a.shape) + a.tobytes()


def _read_exact(stream, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            raise PluginError(f"plug-in closed the stream after {len(buf)} of {n} bytes")
        buf += chunk
    return bytes(buf)


def read_tensor(stream) -> np.ndarray:
    (ndim,) = struct.unpack("<I", _read_exact(stream, 4))
    if ndim > 8:
        raise PluginError(f"implausible tensor rank {ndim}")
    shape = struct.unpack(f"<{ndim}I", _read_exact(stream, 4 * ndim))
    n = int(np.prod(shape)) if ndim else 1
    data = np.frombuffer(_read_exact(stream, 4 * n), "<f4")
    return data.reshape(shape).astype(np.float64)


def pack_request(z: np.ndarray, sigma: float, condition: Optional[bytes]) -> bytes:
    if condition is None:
        head = REQUEST_MAGIC + struct.pack("<di", sigma, -1)
    else:
        head = REQUEST_MAGIC + struct.pack("<di", sigma, len(condition)) + condition
    return head + pack_tensor(z)


def read_request(stream):
    """Server-side helper: returns (z, sigma, condition) or None at end of stream."""
    magic = stream.read(4)
    if not magic:
        return None
    if magic != REQUEST_MAGIC:
        raise PluginError(f"bad request magic {magic!r}")
    sigma, n = struct.unpack("<di", _read_exact(stream, 12))
    cond = None if n < 0 else _read_exact(stream, n)
    return read_tensor(stream), sigma, cond


def write_response(stream, v: np.ndarray) -> None:
    stream.write(RESPONSE_MAGIC + pack_tensor(v))
    stream.flush()


class PluginDenoiser:
    """Runs an external process and talks to it over stdin/stdout."""

    def __init__(self, command: Sequence[str]):
        self.command = list(command)
        try:
            self.proc = subprocess.Popen(self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        except OSError as exc:
            raise PluginError(f"cannot start plug-in {self.command[0]!r}: {exc}") from exc

    def __call__(self, z, sigma, condition=None):
        try:
            self.proc.stdin.write(pack_request(np.asarray(z), float(sigma), condition))
            self.proc.stdin.flush()
            magic = _read_exact(self.proc.stdout, 4)
        except (BrokenPipeError, OSError) as exc:
            raise PluginError(f"plug-in pipe failed: {exc}") from exc
        if magic != RESPONSE_MAGIC:
            raise PluginError(f"bad response magic {magic!r}")
        return read_tensor(self.proc.stdout)

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
