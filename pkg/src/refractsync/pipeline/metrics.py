"""Masked image metrics: grayscale PSNR after histogram matching, and MAE."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ..imageops.plane import ImagePlane, srgb_to_linear

PSNR_CAP = 99.0
HIST_BINS = 256
# Rec. 709 luma weights
LUMA = np.array([0.2126, 0.7152, 0.0722])


class MetricError(ValueError):
    pass


def _linear(img) -> np.ndarray:
    if isinstance(img, ImagePlane):
        return (img if img.space == "linear" else srgb_to_linear(img)).data
    return np.asarray(img, dtype=np.float64)


def luma(img) -> np.ndarray:
    a = _linear(img)
    return a if a.ndim == 2 else a @ LUMA


def _check(result, reference, mask) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim == 3:
        mask = mask.any(axis=2)
    if result.shape[:2] != reference.shape[:2] or mask.shape != reference.shape[:2]:
        raise MetricError("result, reference and mask must share dimensions")
    if not mask.any():
        raise MetricError("empty mask")
    return mask


def _cdf_knots(values: np.ndarray, bins: int):
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return np.array([lo, lo + 1e-12]), np.array([0.0, 1.0])
    hist, edges = np.histogram(values, bins=bins, range=(lo, hi))
    cdf = np.concatenate([[0.0], np.cumsum(hist) / values.size])
    return edges, cdf


def histogram_match(source: np.ndarray, reference: np.ndarray, bins: int = HIST_BINS) -> np.ndarray:
    """Map ``source`` values so their distribution follows ``reference``.

    Both CDFs are piecewise linear between bin edges. The reference CDF is
    inverted segment by segment: a level q maps into the bin k with
    cdf[k] < q <= cdf[k+1], so empty bins (flat runs) are never entered.
    """
    s_edges, s_cdf = _cdf_knots(source, bins)
    r_edges, r_cdf = _cdf_knots(reference, bins)
    q = np.interp(source, s_edges, s_cdf)
    k = np.clip(np.searchsorted(r_cdf, q, side="left") - 1, 0, len(r_cdf) - 2)
    lo, hi = r_cdf[k], r_cdf[k + 1]
    frac = np.where(hi > lo, (q - lo) / np.where(hi > lo, hi - lo, 1.0), 0.0)
    return r_edges[k] + np.clip(frac, 0.0, 1.0) * (r_edges[k + 1] - r_edges[k])


def masked_psnr(result, reference, mask, bins: int = HIST_BINS) -> float:
    a = luma(result)
    b = luma(reference)
    mask = _check(a, b, mask)
    ra, rb = a[mask], b[mask]
    matched = histogram_match(ra, rb, bins)
    mse = float(np.mean((matched - rb) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(1.0 / mse))


def masked_mae(result, reference, mask) -> float:
    a = _linear(result)
    b = _linear(reference)
    mask = _check(a, b, mask)
    return float(np.mean(np.abs(a[mask] - b[mask])))


@dataclass
class MetricReport:
    masked_psnr: float
    masked_mae: float
    valid_pixel_count: int
    # reserved for externally computed neural metrics
    clip_score: Optional[float] = None
    image_reward: Optional[float] = None
    lpips: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def rows(self) -> list[tuple[str, str]]:
        out = []
        for k, v in asdict(self).items():
            if k == "extra":
                out += [(str(kk), _fmt(vv)) for kk, vv in sorted(v.items())]
            else:
                out.append((k, _fmt(v)))
        return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def score(result, reference, mask) -> MetricReport:
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim == 3:
        mask = mask.any(axis=2)
    return MetricReport(masked_psnr(result, reference, mask), masked_mae(result, reference, mask),
                        int(mask.sum()))
