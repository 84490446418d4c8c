"""Decompose a layered SVG into a cumulative frame sequence."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ZeroLayers
from .grid import GridLayout
from .raster import RasterImage, render
from .svg_doc import Group, Path, Rgba, SvgDocument, WHITE, enumerate_layers, flatten_transforms

LINE_MAX_RGB = 40
LINE_MIN_ALPHA = 200


@dataclass(frozen=True)
class FrameSequence:
    frames: tuple[SvgDocument, ...]
    line_layer: SvgDocument | None
    frame_count: int
    source_id: str = ""
    # per frame: indices (into the rest-layer list) painted in that frame
    layer_sets: tuple[frozenset, ...] = ()

    def render(self, cell: int, background: Rgba | None = WHITE) -> list[RasterImage]:
        return [render(f, cell, cell, background) for f in self.frames]


def is_line_color(c: Rgba | None) -> bool:
    return c is not None and max(c.r, c.g, c.b) <= LINE_MAX_RGB and c.a >= LINE_MIN_ALPHA


def is_line_path(p: Path) -> bool:
    paint = p.stroke.color if p.stroke is not None else p.fill
    return is_line_color(paint)


def _split(node, pred):
    """(matching, rest) copies of ``node``; ``None`` where nothing remains."""
    if isinstance(node, Path):
        return (node, None) if pred(node) else (None, node)
    yes, no = [], []
    for c in node.children:
        a, b = _split(c, pred)
        if a is not None:
            yes.append(a)
        if b is not None:
            no.append(b)
    mk = lambda kids: Group(tuple(kids), node.id, node.transform) if kids else None  # noqa: E731
    return mk(yes), mk(no)


def classify_line_elements(doc: SvgDocument) -> tuple[SvgDocument, SvgDocument]:
    """Partition paths into near-black line work and everything else.

    Group structure and relative order are kept on both sides; groups that
    end up empty are dropped.
    """
    lines, rest = [], []
    for n in doc.root:
        a, b = _split(n, is_line_path)
        if a is not None:
            lines.append(a)
        if b is not None:
            rest.append(b)
    return doc.with_root(lines), doc.with_root(rest)


def bucket_layers(layer_count: int, frame_count: int) -> list[int]:
    """How many new layers each frame adds; front-loaded when uneven."""
    if layer_count < 1:
        raise ZeroLayers("nothing to distribute")
    if frame_count < 1:
        raise ValueError("frame_count must be positive")
    if layer_count < frame_count:
        return [1] * layer_count + [0] * (frame_count - layer_count)
    q, r = divmod(layer_count, frame_count)
    return [q + 1] * r + [q] * (frame_count - r)


def _cumulative(sizes: list[int]) -> list[int]:
    out, n = [], 0
    for s in sizes:
        n += s
        out.append(n)
    return out


def build_sequence(doc: SvgDocument, frame_count: int = 9, isolate_lines: bool = False, source_id: str = "") -> FrameSequence:
    """Frames of growing layer prefixes; optional line layer alone in frame 0.

    With line isolation the line layer stays on top of every later frame.
    """
    if frame_count not in (4, 9):
        raise ValueError("frame_count must be 4 or 9")
    doc = flatten_transforms(doc)
    if not doc.root:
        raise ZeroLayers("document has no layers")
    line_doc = None
    rest = doc
    if isolate_lines:
        line_doc, rest = classify_line_elements(doc)
        if not line_doc.root:
            line_doc, rest = None, doc

    if line_doc is None:
        layers = enumerate_layers(rest)
        ends = _cumulative(bucket_layers(len(layers), frame_count))
        sets = [frozenset(range(e)) for e in ends]
        frames = [rest.with_root(l.node for l in layers[:e]) for e in ends]
        return FrameSequence(tuple(frames), None, frame_count, source_id, tuple(sets))

    lines = list(line_doc.root)
    if not rest.root:
        frames = [line_doc] * frame_count
        return FrameSequence(tuple(frames), line_doc, frame_count, source_id, tuple(frozenset() for _ in frames))
    layers = enumerate_layers(rest)
    ends = [0] + _cumulative(bucket_layers(len(layers), frame_count - 1))
    sets = [frozenset(range(e)) for e in ends]
    frames = [doc.with_root([l.node for l in layers[:e]] + lines) for e in ends]
    return FrameSequence(tuple(frames), line_doc, frame_count, source_id, tuple(sets))


def sequence_images(seq: FrameSequence, layout: GridLayout | None = None) -> list[RasterImage]:
    layout = layout or GridLayout.for_frames(seq.frame_count)
    return seq.render(layout.cell)
