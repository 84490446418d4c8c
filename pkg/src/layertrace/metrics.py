"""Reconstruction metrics: MSE, SSIM, path count, stage timings."""

from __future__ import annotations

import json
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionMismatch, TooSmall
from .imgproc import over_white, to_grayscale
from .raster import RasterImage, render
from .svg_doc import WHITE, SvgDocument, iter_paths

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03
STAGES = ("segment", "trace", "assemble")


@dataclass
class MetricsReport:
    mse: float = 0.0
    ssim: float = 1.0
    path_count: int = 0
    elapsed: dict = field(default_factory=lambda: {k: 0.0 for k in STAGES})

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(float(d["mse"]), float(d["ssim"]), int(d["path_count"]), dict(d["elapsed"]))


class Timer:
    """Accumulates wall-clock seconds per named stage."""

    def __init__(self):
        self.elapsed = {k: 0.0 for k in STAGES}

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.elapsed[name] = self.elapsed.get(name, 0.0) + time.perf_counter() - t0


def _as_unit_rgb(img) -> np.ndarray:
    if isinstance(img, RasterImage):
        return over_white(img) / 255.0
    return np.asarray(img, dtype=np.float64)


def mse(a: RasterImage, b: RasterImage) -> float:
    """Mean squared RGB error in [0, 1] after compositing both over white."""
    if a.shape != b.shape:
        raise DimensionMismatch(f"size mismatch: {a.shape} vs {b.shape}")
    d = _as_unit_rgb(a) - _as_unit_rgb(b)
    return float(np.mean(d * d))


def _gray_unit(img) -> np.ndarray:
    if isinstance(img, RasterImage):
        return to_grayscale(img).data[:, :, 0].astype(np.float64) / 255.0
    return np.asarray(img, dtype=np.float64)


def _gauss_window() -> np.ndarray:
    r = SSIM_WINDOW // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2 * SSIM_SIGMA**2))
    return g / g.sum()


def _filter_valid(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    x = sliding_window_view(x, len(g), axis=0) @ g
    return sliding_window_view(x, len(g), axis=1) @ g


def ssim(a, b) -> float:
    """Single-scale SSIM of two grayscale images with values in [0, 1].

    Accepts RasterImages (converted to luma / 255) or 2-D float arrays.
    Averaged over all fully-inside window positions.
    """
    x, y = _gray_unit(a), _gray_unit(b)
    if x.shape != y.shape:
        raise DimensionMismatch(f"size mismatch: {x.shape} vs {y.shape}")
    if min(x.shape) < SSIM_WINDOW:
        raise TooSmall(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels")
    c1, c2 = SSIM_K1**2, SSIM_K2**2
    g = _gauss_window()
    mx, my = _filter_valid(x, g), _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mx * mx
    syy = _filter_valid(y * y, g) - my * my
    sxy = _filter_valid(x * y, g) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def count_paths(doc: SvgDocument) -> int:
    return sum(1 for _ in iter_paths(doc.root))


def evaluate(result, reference: RasterImage) -> MetricsReport:
    """Compare a layered result (or bare document) with its reference cell."""
    doc = result.svg if hasattr(result, "svg") else result
    out = render(doc, reference.width, reference.height, WHITE)
    elapsed = dict(result.report.elapsed) if hasattr(result, "report") else {k: 0.0 for k in STAGES}
    return MetricsReport(mse(out, reference), ssim(out, reference), count_paths(doc), elapsed)
