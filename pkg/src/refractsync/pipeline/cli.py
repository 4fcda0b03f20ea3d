"""Command-line entry point.

Exit codes: 0 success, 2 input error, 3 physics or placement failure,
4 denoiser plug-in failure.
"""

from __future__ import annotations

import argparse
import logging
import shlex
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .. import fileio
from ..geometry.mesh import GeometryError
from ..imageops.blend import fresnel_composite
from ..imageops.plane import ImageError, ImagePlane, load_linear, save_image
from ..imageops.pyramid import pyramid_warp
from ..optics import OpticsError
from ..sync.denoisers import DenoiserError, OracleDenoiser, PluginDenoiser, PluginError
from ..sync.loop import Branch, SyncScene, run_generation
from ..sync.sampler import SamplerError
from ..warpfield.compile import WarpBundle, compile_warps
from ..warpfield.field import WarpFormatError
from . import report
from .build import build_scene
from .config import ConfigError, SceneConfig, load_config
from .fixtures import write_demo_scene
from .metrics import MetricError, score

log = logging.getLogger("refractsync")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PHYSICS = 3
EXIT_PLUGIN = 4


def _compile(cfg: SceneConfig, threads: Optional[int] = None):
    built = build_scene(cfg)
    bundle = compile_warps(built.persp_cam, built.pano_cam, built.scene, cfg.warps.max_events,
                           cfg.warps.restrict_refraction_to_object, threads)
    return built, bundle


def _require_clean(built) -> ImagePlane:
    if built.clean is None:
        raise ConfigError("background.clean_image is required for this command")
    return built.clean


def refraction_preview(clean: ImagePlane, bundle: WarpBundle, env_color, panorama: Optional[ImagePlane] = None):
    """Object-free image seen through the object, Fresnel-composited with the environment.

    Without a panorama the environment is a constant colour. Plain bilinear
    warping keeps the preview sharp.
    """
    refr, m = pyramid_warp(clean, bundle.self_warp, levels=1)
    env = np.broadcast_to(np.asarray(env_color, dtype=np.float64), refr.data.shape)
    data = refr.data.copy()
    holes = ~m
    if panorama is not None:
        via_pano, pm = pyramid_warp(panorama, bundle.pano_to_persp_refraction, levels=1)
        use = holes & pm
        data[use] = via_pano.data[use]
        holes &= ~pm
        refl, _ = pyramid_warp(panorama, bundle.pano_to_persp_reflection, levels=1)
    else:
        refl = ImagePlane(env)
    data[holes] = env[holes]
    return fresnel_composite(ImagePlane(data), refl, bundle.fresnel)


def cmd_fixture(args) -> int:
    path = write_demo_scene(args.out, args.width, args.height, args.pano_height, args.steps)
    print(path)
    return EXIT_OK


def cmd_compile_warps(args) -> int:
    cfg = load_config(args.config)
    built, bundle = _compile(cfg, args.threads)
    out = Path(args.out)
    files = bundle.save(out)
    mask = bundle.object_mask
    rows = [
        ("perspective_size", f"{built.persp_cam.width}x{built.persp_cam.height}"),
        ("panorama_size", f"{built.pano_cam.width}x{built.pano_cam.height}"),
        ("object_pixels", int(mask.sum())),
        ("self_warp_valid_object_pixels", int((bundle.self_warp.mask & mask).sum())),
        ("pano_to_persp_refraction_valid", int(bundle.pano_to_persp_refraction.mask.sum())),
        ("pano_to_persp_reflection_valid", int(bundle.pano_to_persp_reflection.mask.sum())),
        ("persp_to_pano_valid", int(bundle.persp_to_pano.mask.sum())),
        ("fresnel_mean_on_object", f"{bundle.fresnel.weights[mask].mean():.6f}" if mask.any() else ""),
        ("object_transform", " ".join(f"{v:.9g}" for v in built.transform.ravel())),
    ]
    report.write_table(out / "summary.tsv", ("quantity", "value"), rows)
    if built.clean is not None:
        preview = refraction_preview(built.clean, bundle, args.env_color)
        save_image(out / "refraction_preview.png", preview)
        report.warp_figure(out / "warps.png", bundle, preview)
    for f in files:
        log.info("wrote %s", f)
    return EXIT_OK


def cmd_render_refraction(args) -> int:
    cfg = load_config(args.config)
    if args.warps:
        bundle = WarpBundle.load(args.warps)
        clean = load_linear(cfg.background.clean_image) if cfg.background.clean_image else None
    else:
        built, bundle = _compile(cfg, args.threads)
        clean = built.clean
    if clean is None:
        raise ConfigError("background.clean_image is required for this command")
    pano = load_linear(args.panorama) if args.panorama else None
    img = refraction_preview(clean, bundle, args.env_color, pano)
    save_image(args.out, img, bits=args.bits)
    return EXIT_OK


def _branches(args, cfg: SceneConfig):
    if args.plugin:
        plugin = PluginDenoiser(shlex.split(args.plugin))
        persp = Branch(plugin, args.prompt.encode(), None)
        pano = Branch(plugin, args.pano_prompt.encode(), None)
        return persp, pano, plugin
    if not (args.oracle_perspective and args.oracle_panorama):
        raise ConfigError("give --plugin or both --oracle-perspective and --oracle-panorama")
    tp = load_linear(args.oracle_perspective)
    tq = load_linear(args.oracle_panorama)
    return Branch(OracleDenoiser(tp.data)), Branch(OracleDenoiser(tq.data)), None


def cmd_sync_generate(args) -> int:
    cfg = load_config(args.config)
    sync = cfg.sync
    if args.seed is not None:
        sync.seed = args.seed
    if args.mode is not None:
        sync.mode = args.mode
    if args.steps is not None:
        sync.steps = args.steps
    sync.__post_init__()
    if args.warps:
        bundle = WarpBundle.load(args.warps)
        built = build_scene(cfg)
    else:
        built, bundle = _compile(cfg, args.threads)
    scene = SyncScene(bundle, _require_clean(built), built.persp_cam, built.pano_cam)
    persp, pano, plugin = _branches(args, cfg)
    try:
        result = run_generation(sync, scene, persp, pano)
    except DenoiserError as exc:
        if plugin is not None and not isinstance(exc, PluginError):
            raise PluginError(str(exc)) from exc
        raise
    finally:
        if plugin is not None:
            plugin.close()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_image(out / "perspective.png", result.perspective, bits=args.bits)
    save_image(out / "panorama.png", result.panorama, bits=args.bits)
    (out / "trace.txt").write_text("\n".join(result.trace) + "\n")
    rows = [[kv.split("=")[1] for kv in line.split()] for line in result.trace]
    report.write_table(out / "trace.tsv", ("step", "sigma", "res_persp", "res_pano", "tt"), rows)
    report.trace_figure(out / "trace.png", result.trace)
    return EXIT_OK


def cmd_score(args) -> int:
    result = load_linear(args.result)
    reference = load_linear(args.reference)
    if args.mask:
        m = fileio.read_png(args.mask)
        mask = (m if m.ndim == 2 else m.max(axis=2)) > 0.5
    else:
        mask = np.ones(reference.shape, bool)
    rep = score(result, reference, mask)
    rows = rep.rows()
    for k, v in rows:
        print(f"{k}\t{v}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report.write_table(out / "metrics.tsv", ("metric", "value"), rows)
        report.write_table(out / "metrics.csv", ("metric", "value"), rows, delimiter=",")
        report.score_figure(out / "score.png", result, reference, mask)
    return EXIT_OK


def _color(text: str):
    parts = [float(x) for x in text.split(",")]
    if len(parts) == 1:
        parts *= 3
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("colour needs 1 or 3 comma-separated values")
    return parts


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="refractsync", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile-warps", help="trace the warp fields and Fresnel weights for a scene")
    c.add_argument("config")
    c.add_argument("--out", required=True, help="output directory")
    c.add_argument("--threads", type=int)
    c.add_argument("--env-color", type=_color, default=[0.5, 0.5, 0.5])
    c.set_defaults(func=cmd_compile_warps)

    r = sub.add_parser("render-refraction", help="render the object-free image through the object")
    r.add_argument("config")
    r.add_argument("--out", required=True, help="output image (.png or .pfm)")
    r.add_argument("--warps", help="directory of previously compiled warps")
    r.add_argument("--panorama", help="environment panorama for reflections and escaped rays")
    r.add_argument("--env-color", type=_color, default=[0.5, 0.5, 0.5])
    r.add_argument("--threads", type=int)
    r.add_argument("--bits", type=int, choices=(8, 16), default=8)
    r.set_defaults(func=cmd_render_refraction)

    g = sub.add_parser("sync-generate", help="run the synchronized two-view sampler")
    g.add_argument("config")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--warps", help="directory of previously compiled warps")
    g.add_argument("--plugin", help="denoiser plug-in command line")
    g.add_argument("--prompt", default="", help="condition passed to the plug-in for the perspective view")
    g.add_argument("--pano-prompt", default="", help="condition for the panorama view")
    g.add_argument("--oracle-perspective", help="target image for the built-in oracle denoiser")
    g.add_argument("--oracle-panorama", help="target panorama for the built-in oracle denoiser")
    g.add_argument("--seed", type=int)
    g.add_argument("--mode", choices=("ode", "sde"))
    g.add_argument("--steps", type=int)
    g.add_argument("--threads", type=int)
    g.add_argument("--bits", type=int, choices=(8, 16), default=8)
    g.set_defaults(func=cmd_sync_generate)

    s = sub.add_parser("score", help="masked PSNR and MAE against a reference")
    s.add_argument("result")
    s.add_argument("reference")
    s.add_argument("--mask", help="PNG mask, nonzero = evaluated")
    s.add_argument("--out", help="directory for metrics tables and figure")
    s.set_defaults(func=cmd_score)

    f = sub.add_parser("fixture", help="write a small demo scene")
    f.add_argument("out")
    f.add_argument("--width", type=int, default=160)
    f.add_argument("--height", type=int, default=120)
    f.add_argument("--pano-height", type=int, default=64)
    f.add_argument("--steps", type=int, default=8)
    f.set_defaults(func=cmd_fixture)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except PluginError as exc:
        print(f"error: plug-in failure: {exc}", file=sys.stderr)
        return EXIT_PLUGIN
    except DenoiserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (GeometryError, OpticsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, ImageError, WarpFormatError, MetricError, SamplerError, fileio.FormatError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
