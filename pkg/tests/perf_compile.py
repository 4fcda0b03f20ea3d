"""Times warp compilation for a 720x1280 view of a 100k-triangle sphere on a depth-mesh table.

Run as a script; prints one JSON object. Thread counts come from argv.
NUMBA_NUM_THREADS must be set in the environment before this process starts.
"""

import json
import sys
import time
import warnings

warnings.filterwarnings("ignore", message=".*TBB.*")

import numba  # noqa: E402
import numpy as np  # noqa: E402

from refractsync.geometry import (DepthMap, PanoCamera, PerspectiveCamera, Scene, depth_to_mesh,  # noqa: E402
                                  place_object, sphere_with_triangles)
from refractsync.pipeline.fixtures import tabletop_depth  # noqa: E402
from refractsync.warpfield import compile_warps  # noqa: E402


def build(width, height, n_tri):
    cam = PerspectiveCamera.from_fov(width, height, 60.0)
    depth, _ = tabletop_depth(cam)
    bg = depth_to_mesh(DepthMap(depth), cam)
    obj = sphere_with_triangles(n_tri)
    obj = obj.transformed(place_object(obj, bg, cam, size=0.5))
    scene = Scene(obj, bg, 1.5)
    lo, hi = obj.bounds()
    pano = PanoCamera.with_height(0.5 * (lo + hi), 512)
    return cam, pano, scene


def main(threads):
    # warm-up compiles (or loads) every kernel on a tiny scene
    cam, pano, scene = build(64, 36, 2000)
    compile_warps(cam, pano, scene, threads=1)
    t0 = time.perf_counter()
    cam, pano, scene = build(1280, 720, 100_000)
    t_build = time.perf_counter() - t0
    out = {"pool": numba.config.NUMBA_NUM_THREADS, "build_s": t_build,
           "triangles": int(len(scene.background.triangles) + len(scene.object.triangles)),
           "object_pixels": None, "compile_s": {}}
    for n in threads:
        t0 = time.perf_counter()
        b = compile_warps(cam, pano, scene, threads=n)
        out["compile_s"][str(n)] = time.perf_counter() - t0
        out["object_pixels"] = int(b.object_mask.sum())
    print(json.dumps(out))


if __name__ == "__main__":
    main([int(a) for a in sys.argv[1:]] or [1])
