"""Flow-matching samplers and the synchronized two-view generation loop."""

from .denoisers import (DenoiserError, IdentityCodec, OracleDenoiser, PluginDenoiser, PluginError,
                        ZeroDenoiser, pack_request, read_request, write_response)
from .loop import (PANO, PERSP, Branch, GenerationResult, SyncConfig, SyncScene, run_generation,
                   synchronize_views)
from .sampler import (NoiseSchedule, SamplerError, cfg_velocity, euler_estimate, guided_step,
                      ode_step, renoise, renoise_scale, sde_step)

__all__ = [
    "DenoiserError", "IdentityCodec", "OracleDenoiser", "PluginDenoiser", "PluginError",
    "ZeroDenoiser", "pack_request", "read_request", "write_response",
    "PANO", "PERSP", "Branch", "GenerationResult", "SyncConfig", "SyncScene", "run_generation",
    "synchronize_views",
    "NoiseSchedule", "SamplerError", "cfg_velocity", "euler_estimate", "guided_step", "ode_step",
    "renoise", "renoise_scale", "sde_step",
]
