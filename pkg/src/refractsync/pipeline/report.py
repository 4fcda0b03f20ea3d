"""Figures and delimited tables written by the CLI."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..imageops.plane import ImagePlane, linear_to_srgb  # noqa: E402
from ..warpfield.compile import WarpBundle  # noqa: E402
from .metrics import luma, histogram_match  # noqa: E402

# fixed metadata keeps PNG bytes reproducible across runs
_PNG_META = {"Software": "refractsync"}


def write_table(path, header: Sequence[str], rows: Iterable[Sequence], delimiter: str = "\t") -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)
    return path


def _display(img: ImagePlane) -> np.ndarray:
    enc = linear_to_srgb(img) if img.space == "linear" else img
    return np.clip(enc.data, 0.0, 1.0)


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)
    return path


def warp_figure(path, bundle: WarpBundle, preview: ImagePlane) -> Path:
    sw = bundle.self_warp
    h, w = sw.mask.shape
    ys, xs = np.mgrid[0:h, 0:w]
    disp = np.hypot(sw.coords[..., 0] - xs, sw.coords[..., 1] - ys)
    disp = np.where(sw.mask, disp, np.nan)
    fig, axes = plt.subplots(2, 3, figsize=(12, 6.5))
    ax = axes.ravel()
    ax[0].imshow(bundle.object_mask, cmap="gray")
    ax[0].set_title("object silhouette")
    im = ax[1].imshow(disp, cmap="viridis")
    ax[1].set_title("self-warp displacement [px]")
    fig.colorbar(im, ax=ax[1], fraction=0.046)
    im = ax[2].imshow(np.where(bundle.object_mask, bundle.fresnel.weights, np.nan), cmap="magma",
                      vmin=0, vmax=1)
    ax[2].set_title("Fresnel weight")
    fig.colorbar(im, ax=ax[2], fraction=0.046)
    ax[3].imshow(bundle.pano_to_persp_refraction.coords[..., 0], cmap="twilight")
    ax[3].set_title("pano longitude seen through object")
    ax[4].imshow(bundle.persp_to_pano.mask, cmap="gray")
    ax[4].set_title("pano pixels visible in view")
    ax[5].imshow(_display(preview))
    ax[5].set_title("refraction preview")
    for a in ax:
        a.set_xticks([])
        a.set_yticks([])
    fig.tight_layout()
    return _save(fig, path)


def score_figure(path, result: ImagePlane, reference: ImagePlane, mask: np.ndarray) -> Path:
    a = luma(result)
    b = luma(reference)
    matched = np.zeros_like(a)
    matched[mask] = histogram_match(a[mask], b[mask])
    err = np.where(mask, np.abs(matched - b), np.nan)
    fig, ax = plt.subplots(1, 4, figsize=(15, 3.8))
    ax[0].imshow(_display(result))
    ax[0].set_title("result")
    ax[1].imshow(_display(reference))
    ax[1].set_title("reference")
    im = ax[2].imshow(err, cmap="inferno")
    ax[2].set_title("|matched luma - reference|")
    fig.colorbar(im, ax=ax[2], fraction=0.046)
    for a_ in ax[:3]:
        a_.set_xticks([])
        a_.set_yticks([])
    bins = np.linspace(0, max(1.0, float(b[mask].max())), 65)
    ax[3].hist(b[mask], bins=bins, histtype="step", label="reference")
    ax[3].hist(a[mask], bins=bins, histtype="step", label="result")
    ax[3].hist(matched[mask], bins=bins, histtype="step", linestyle="--", label="matched")
    ax[3].set_xlabel("luma")
    ax[3].legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def trace_figure(path, trace: Sequence[str]) -> Path:
    rows = [dict(kv.split("=") for kv in line.split()) for line in trace]
    k = np.arange(len(rows))
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.semilogy(k, [max(float(r["res_persp"]), 1e-12) for r in rows], label="perspective")
    ax.semilogy(k, [max(float(r["res_pano"]), 1e-12) for r in rows], label="panorama")
    ax.set_xlabel("denoiser pass")
    ax.set_ylabel("RMS synchronization change")
    ax.legend(frameon=False)
    fig.tight_layout()
    return _save(fig, path)
