"""Pixel primitives for line extraction and differential analysis."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, NonPositiveSigma
from .raster import RasterImage

LINE_BLUR_SIGMA = 1.0


@dataclass(frozen=True)
class DiffConfig:
    diff_threshold: int = 12
    morph_kernel: int = 3
    min_region_area: int = 16

    def __post_init__(self):
        if not 1 <= self.diff_threshold <= 254:
            raise ValueError("diff_threshold must lie in [1, 254]")
        if self.morph_kernel < 1 or self.morph_kernel % 2 == 0:
            raise ValueError("morph_kernel must be odd and >= 1")
        if self.min_region_area < 0:
            raise ValueError("min_region_area must be >= 0")


def _round(x) -> np.ndarray:
    return np.floor(np.asarray(x) + 0.5)


def over_white(img: RasterImage) -> np.ndarray:
    """RGB float array in [0, 255] of an RGBA image composited on white."""
    d = img.data.astype(np.float64)
    if img.channels == 1:
        return np.repeat(d, 3, axis=2)
    a = d[:, :, 3:4] / 255.0
    return d[:, :, :3] * a + 255.0 * (1.0 - a)


def to_grayscale(img: RasterImage) -> RasterImage:
    if img.channels == 1:
        return img
    rgb = _round(over_white(img))
    luma = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    return RasterImage(_round(luma).astype(np.uint8))


def gaussian_kernel(sigma: float) -> np.ndarray:
    r = math.ceil(3 * sigma)
    x = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(img: RasterImage, sigma: float) -> RasterImage:
    """Separable sampled-Gaussian blur with clamp-to-edge borders."""
    if not sigma > 0:
        raise NonPositiveSigma(f"sigma must be positive, got {sigma}")
    k = gaussian_kernel(sigma)
    g = to_grayscale(img).data[:, :, 0].astype(np.float64)
    g = ndimage.correlate1d(g, k, axis=0, mode="nearest")
    g = ndimage.correlate1d(g, k, axis=1, mode="nearest")
    return RasterImage(np.clip(_round(g), 0, 255).astype(np.uint8))


def otsu_threshold(img: RasterImage) -> int:
    """Level t maximizing between-class variance of {<= t} vs {> t}.

    Ties go to the smallest t. A constant image returns its value.
    """
    g = to_grayscale(img).data.ravel()
    if g.size == 0:
        raise ValueError("empty image")
    hist = np.bincount(g, minlength=256).tolist()
    if sum(1 for h in hist if h) == 1:
        return int(g[0])
    # between-class variance w0*w1*(m0 - m1)^2 = (s0*w1 - s1*w0)^2 / (w0*w1),
    # compared as exact integer fractions
    total = sum(hist)
    stotal = sum(i * h for i, h in enumerate(hist))
    best_t, best_num, best_den = 0, -1, 1
    w0 = s0 = 0
    for t in range(255):
        w0 += hist[t]
        s0 += t * hist[t]
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            continue
        num = (s0 * w1 - (stotal - s0) * w0) ** 2
        den = w0 * w1
        if num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t


def extract_line_layer(cell: RasterImage) -> RasterImage:
    """Opaque black where the blurred luma is at or below the Otsu level."""
    blurred = gaussian_blur(to_grayscale(cell), LINE_BLUR_SIGMA)
    g = blurred.data[:, :, 0]
    out = np.zeros(g.shape + (4,), np.uint8)
    if np.all(g == 255):
        return RasterImage(out)
    t = otsu_threshold(blurred)
    out[:, :, 3] = np.where(g <= t, 255, 0)
    return RasterImage(out)


def _check_same(a: RasterImage, b) -> None:
    sa = a.shape
    sb = b.shape if isinstance(b, RasterImage) else b.shape[:2]
    if sa != sb:
        raise DimensionMismatch(f"size mismatch: {sa} vs {sb}")


def erode(mask: np.ndarray, k: int) -> np.ndarray:
    return ndimage.minimum_filter(mask.astype(np.uint8), size=k, mode="nearest").astype(bool)


def dilate(mask: np.ndarray, k: int) -> np.ndarray:
    return ndimage.maximum_filter(mask.astype(np.uint8), size=k, mode="nearest").astype(bool)


def open_close(mask: np.ndarray, k: int) -> np.ndarray:
    """Opening (erode, dilate) followed by closing (dilate, erode)."""
    if k == 1:
        return mask.copy()
    opened = dilate(erode(mask, k), k)
    return erode(dilate(opened, k), k)


def remove_small_regions(mask: np.ndarray, min_area: int) -> np.ndarray:
    if min_area <= 1 or not mask.any():
        return mask
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), bool))
    sizes = np.bincount(labels.ravel(), minlength=n + 1)
    keep = sizes >= min_area
    keep[0] = False
    return keep[labels]


def raw_diff(prev: RasterImage, nxt: RasterImage, threshold: int) -> np.ndarray:
    _check_same(prev, nxt)
    a = to_grayscale(prev).data[:, :, 0].astype(np.int16)
    b = to_grayscale(nxt).data[:, :, 0].astype(np.int16)
    return np.abs(b - a) >= threshold


def frame_diff(prev: RasterImage, nxt: RasterImage, cfg: DiffConfig = DiffConfig()) -> np.ndarray:
    """Boolean (height, width) mask of significant luma change."""
    mask = raw_diff(prev, nxt, cfg.diff_threshold)
    mask = open_close(mask, cfg.morph_kernel)
    return remove_small_regions(mask, cfg.min_region_area)


def mask_to_rgba(nxt: RasterImage, mask: np.ndarray) -> RasterImage:
    _check_same(nxt, mask)
    out = np.zeros(nxt.shape + (4,), np.uint8)
    src = nxt.data if nxt.channels == 4 else np.repeat(nxt.data, 4, axis=2)
    out[mask, :3] = src[mask, :3]
    out[mask, 3] = 255
    return RasterImage(out)
