"""Image containers, colour conversion, Laplacian pyramid warping and blending."""

from .blend import DEFAULT_LAMBDA, blend_phi, blend_warped, fresnel_composite
from .plane import (ImageError, ImagePlane, linear_to_srgb, load_image, load_linear, save_image,
                    srgb_to_linear)
from .pyramid import (DEFAULT_LEVELS, LaplacianPyramid, bilinear_sample, build_pyramid,
                      collapse_pyramid, level_shapes, pyr_down, pyr_up, pyramid_warp)

__all__ = [
    "DEFAULT_LAMBDA", "blend_phi", "blend_warped", "fresnel_composite",
    "ImageError", "ImagePlane", "linear_to_srgb", "load_image", "load_linear", "save_image",
    "srgb_to_linear",
    "DEFAULT_LEVELS", "LaplacianPyramid", "bilinear_sample", "build_pyramid", "collapse_pyramid",
    "level_shapes", "pyr_down", "pyr_up", "pyramid_warp",
]
