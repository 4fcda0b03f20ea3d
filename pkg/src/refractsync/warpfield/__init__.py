"""Warp fields between the perspective view and the panorama."""

from .compile import (VISIBILITY_TOLERANCE, PerspectiveTrace, WarpBundle, compile_warps,
                      compute_fresnel_weights, compute_pano_to_persp_reflection,
                      compute_pano_to_persp_refraction, compute_persp_to_pano, compute_self_warp,
                      trace_perspective)
from .field import FresnelWeightMap, WarpField, WarpFormatError

__all__ = [
    "VISIBILITY_TOLERANCE", "PerspectiveTrace", "WarpBundle", "compile_warps",
    "compute_fresnel_weights", "compute_pano_to_persp_reflection", "compute_pano_to_persp_refraction",
    "compute_persp_to_pano", "compute_self_warp", "trace_perspective",
    "FresnelWeightMap", "WarpField", "WarpFormatError",
]
