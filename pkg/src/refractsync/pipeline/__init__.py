"""Scene configuration, metrics, reports and the command-line interface."""

from .build import BuiltScene, build_scene, make_camera
from .config import ConfigError, SceneConfig, load_config, parse_config
from .metrics import MetricError, MetricReport, histogram_match, luma, masked_mae, masked_psnr, score

__all__ = [
    "BuiltScene", "build_scene", "make_camera",
    "ConfigError", "SceneConfig", "load_config", "parse_config",
    "MetricError", "MetricReport", "histogram_match", "luma", "masked_mae", "masked_psnr", "score",
]
