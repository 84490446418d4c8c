"""Turn a cumulative frame sequence into one layered SVG.

Each kept frame contributes the pixels that changed since the previous kept
frame, traced into its own top-level group. Black line work, when present,
is traced once and placed above everything else.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .decomposer import is_line_color
from .errors import EmptyGrid, EmptyInput
from .grid import GridLayout, infer_layout, segment_grid
from .imgproc import DiffConfig, dilate, extract_line_layer, frame_diff, mask_to_rgba, over_white
from .metrics import MetricsReport, Timer, evaluate, mse
from .raster import RasterImage
from .svg_doc import BLACK, Group, SvgDocument
from .tracer import TraceConfig, VectorLayer, trace_layer

WHITE_LEVEL = 250  # every channel at or above this reads as background
LINE_LEVEL = 40  # every channel at or below this reads as line ink
OUTLINE_RATIO = 0.95
LINE_MODES = ("auto", "on", "off")
LINE_SOURCES = ("first", "last")


@dataclass(frozen=True)
class PipelineConfig:
    diff: DiffConfig = field(default_factory=DiffConfig)
    trace: TraceConfig = field(default_factory=TraceConfig)
    dedup_mse: float = 1e-5
    line_mode: str = "auto"
    line_source: str = "last"
    workers: int = 1

    def __post_init__(self):
        if not self.dedup_mse >= 0:
            raise ValueError("dedup_mse must be >= 0")
        if self.line_mode not in LINE_MODES:
            raise ValueError(f"line_mode must be one of {LINE_MODES}")
        if self.line_source not in LINE_SOURCES:
            raise ValueError(f"line_source must be one of {LINE_SOURCES}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class LayeredResult:
    svg: SvgDocument
    kept_frames: list[int]
    per_layer_pngs: list[RasterImage]
    report: MetricsReport
    has_line_layer: bool = False

    @property
    def layer_count(self) -> int:
        return len(self.svg.root)


def dedupe_frames(cells, dedup_mse: float = 1e-5) -> list[int]:
    """Greedy scan keeping frames that differ from the last kept one."""
    cells = list(cells)
    if not cells:
        raise EmptyInput("no frames to deduplicate")
    kept = [0]
    for t in range(1, len(cells)):
        if mse(cells[t], cells[kept[-1]]) > dedup_mse:
            kept.append(t)
    return kept


def content_mask(cell: RasterImage) -> np.ndarray:
    """Pixels that are not (near) white once composited on white."""
    return np.any(over_white(cell) < WHITE_LEVEL, axis=2)


def ink_mask(cell: RasterImage) -> np.ndarray:
    return np.all(over_white(cell) <= LINE_LEVEL, axis=2)


def is_outline_style(cell: RasterImage, ratio: float = OUTLINE_RATIO) -> bool:
    """True when the cell's visible content is almost entirely black ink.

    Anti-aliased fringe pixels touching ink are ignored so that thin lines
    are not penalized for their soft edges.
    """
    ink = ink_mask(cell)
    if not ink.any():
        return False
    other = content_mask(cell) & ~ink & ~dilate(ink, 3)
    n_ink = int(ink.sum())
    return n_ink >= ratio * (n_ink + int(other.sum()))


def _with_alpha(cell: RasterImage, mask: np.ndarray) -> RasterImage:
    return mask_to_rgba(cell, mask)


def _trace(job):
    img, hint, cfg = job
    return trace_layer(img, cfg, hint)


def _group(vl: VectorLayer, k: int) -> Group:
    return Group(tuple(vl.to_nodes()), f"layer-{k}")


def _ink_only(vl: VectorLayer) -> VectorLayer:
    # the line mask can pick up dark fill pixels; line paths stay near-black
    return VectorLayer([(d, c if is_line_color(c) else BLACK) for d, c in vl.paths])


def vectorize_sequence(frames, cfg: PipelineConfig = PipelineConfig(), timer: Timer | None = None) -> LayeredResult:
    """Vectorize pre-segmented cells (temporal order, equal sizes)."""
    frames = list(frames)
    if not frames:
        raise EmptyInput("no frames")
    timer = timer or Timer()
    with timer.stage("segment"):
        if not any(content_mask(f).any() for f in frames):
            raise EmptyGrid("every frame is blank")
        kept = dedupe_frames(frames, cfg.dedup_mse)
        cells = [frames[t] for t in kept]
        line_on = cfg.line_mode == "on" or (cfg.line_mode == "auto" and is_outline_style(frames[0]))
        line_img = None
        line_px = np.zeros(cells[0].shape, bool)
        if line_on:
            src = cells[-1] if cfg.line_source == "last" else cells[0]
            line_img = extract_line_layer(src)
            line_px = line_img.data[:, :, 3] > 0
            line_img = _with_alpha(src, line_px)
        layers = [_with_alpha(cells[0], content_mask(cells[0]) & ~line_px)]
        for prev, nxt in zip(cells, cells[1:]):
            layers.append(_with_alpha(nxt, frame_diff(prev, nxt, cfg.diff)))

    with timer.stage("trace"):
        jobs = [(img, cell, cfg.trace) for img, cell in zip(layers, cells)]
        if line_img is not None and line_px.any():
            jobs.append((line_img, cells[-1] if cfg.line_source == "last" else cells[0], cfg.trace))
        if cfg.workers > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(cfg.workers) as pool:
                traced = list(pool.map(_trace, jobs))
        else:
            traced = [_trace(j) for j in jobs]

    with timer.stage("assemble"):
        groups = [_group(vl, k) for k, vl in enumerate(traced[: len(layers)])]
        has_lines = len(traced) > len(layers)
        pngs = list(layers)
        if has_lines:
            groups.append(_group(_ink_only(traced[-1]), len(groups)))
            pngs.append(line_img)
        h, w = cells[0].shape
        doc = SvgDocument(w, h, tuple(groups))
        result = LayeredResult(doc, kept, pngs, MetricsReport(), has_lines)
        report = evaluate(doc, cells[-1])
    report.elapsed = dict(timer.elapsed)
    result.report = report
    return result


def vectorize_grid(grid: RasterImage, layout: GridLayout | str = "auto", cfg: PipelineConfig = PipelineConfig()) -> LayeredResult:
    """Segment a serpentine grid and vectorize its cells."""
    timer = Timer()
    with timer.stage("segment"):
        if layout == "auto":
            layout = infer_layout(grid)
        elif isinstance(layout, str):
            layout = GridLayout.parse(layout)
        frames = segment_grid(grid, layout)
    return vectorize_sequence(frames, cfg, timer)
