"""Refraction-aware synchronized generation of a perspective view and its environment panorama."""

import warnings

# numba falls back to another threading layer on its own; the notice is noise
warnings.filterwarnings("ignore", message=".*TBB.*")
