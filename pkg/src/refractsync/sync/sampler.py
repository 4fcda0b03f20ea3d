"""Flow-matching schedule and single-step sampler algebra.

Latents follow the linear interpolant ``z_t = (1 - sigma_t) z_0 + sigma_t eps``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SamplerError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseSchedule:
    sigmas: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sigmas, dtype=np.float64)
        if s.ndim != 1 or len(s) < 2:
            raise SamplerError("schedule needs at least two sigmas")
        if s[0] != 1.0 or s[-1] != 0.0:
            raise SamplerError("schedule must start at 1 and end at 0")
        if np.any(np.diff(s) >= 0):
            raise SamplerError("sigmas must be strictly decreasing")
        object.__setattr__(self, "sigmas", s)

    @property
    def steps(self) -> int:
        return len(self.sigmas) - 1

    @classmethod
    def linear(cls, steps: int, shift: float = 1.0) -> "NoiseSchedule":
        """Uniform sigmas, optionally warped by ``shift * s / (1 + (shift - 1) s)``."""
        if steps < 1:
            raise SamplerError("need at least one step")
        if shift <= 0:
            raise SamplerError("shift must be positive")
        s = np.linspace(1.0, 0.0, steps + 1)
        if shift != 1.0:
            s = shift * s / (1.0 + (shift - 1.0) * s)
        s[0], s[-1] = 1.0, 0.0
        return cls(s)


def _same_shape(a, b, what: str) -> None:
    if np.shape(a) != np.shape(b):
        raise SamplerError(f"{what}: shape mismatch {np.shape(a)} vs {np.shape(b)}")


def euler_estimate(z, v, sigma: float) -> np.ndarray:
    _same_shape(z, v, "euler_estimate")
    return z - sigma * v


def cfg_velocity(v_cond, v_uncond, omega: float) -> np.ndarray:
    _same_shape(v_cond, v_uncond, "cfg_velocity")
    if omega == 0:
        return np.array(v_cond, dtype=np.float64, copy=True)
    return (1.0 + omega) * v_cond - omega * v_uncond


def _check_descending(sigma: float, sigma_next: float) -> None:
    if sigma_next > sigma:
        raise SamplerError(f"sigmas must not increase ({sigma} -> {sigma_next})")


def ode_step(z, v, sigma: float, sigma_next: float) -> np.ndarray:
    _same_shape(z, v, "ode_step")
    _check_descending(sigma, sigma_next)
    return z + (sigma_next - sigma) * v


def sde_step(z, v, sigma: float, sigma_next: float, rng: np.random.Generator) -> np.ndarray:
    out = ode_step(z, v, sigma, sigma_next)
    return out + abs(sigma - sigma_next) * rng.standard_normal(np.shape(z))


def guided_step(z, z0_hat, sigma: float, sigma_next: float) -> np.ndarray:
    """Step towards a (possibly edited) clean estimate; returns ``z0_hat`` itself at sigma_next = 0."""
    _same_shape(z, z0_hat, "guided_step")
    if sigma == 0:
        raise SamplerError("already clean")
    _check_descending(sigma, sigma_next)
    if sigma_next == 0:
        return np.array(z0_hat, dtype=np.float64, copy=True)
    return z + ((sigma_next - sigma) / sigma) * (z - z0_hat)


def renoise_scale(sigma: float, sigma_up: float) -> tuple[float, float]:
    """(a, s) of the marginal-preserving transition ``z' = a z + s eps``."""
    if sigma_up < sigma:
        raise SamplerError("renoising must move to a noisier sigma")
    if sigma >= 1.0:
        if sigma_up != sigma:
            raise SamplerError("cannot renoise beyond pure noise")
        return 1.0, 0.0
    a = (1.0 - sigma_up) / (1.0 - sigma)
    s2 = sigma_up ** 2 - (a * sigma) ** 2
    return a, float(np.sqrt(max(s2, 0.0)))


def renoise(z, sigma: float, sigma_up: float, rng: np.random.Generator) -> np.ndarray:
    a, s = renoise_scale(sigma, sigma_up)
    if s == 0.0:
        return a * np.asarray(z, dtype=np.float64)
    return a * np.asarray(z, dtype=np.float64) + s * rng.standard_normal(np.shape(z))
