"""Minimal SVG document model: groups, Bézier paths, affine transforms.

Documents are immutable value objects. Path geometry is normalized to
absolute move / line / cubic / close commands; every other curve type is
converted when the document is parsed (see :mod:`layertrace.svg_parse`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Union
from xml.sax.saxutils import quoteattr

from .errors import EmptyDocument, SingularTransform

Point = tuple[float, float]
# SVG matrix(a b c d e f): x' = a x + c y + e, y' = b x + d y + f
Affine = tuple[float, float, float, float, float, float]

IDENTITY: Affine = (1.0, 0.0, 0.0, 1.0, 0.0, 0.0)
SVG_NS = "http://www.w3.org/2000/svg"


def compose(outer: Affine, inner: Affine) -> Affine:
    """Matrix product ``outer @ inner`` (inner is applied first)."""
    a1, b1, c1, d1, e1, f1 = outer
    a2, b2, c2, d2, e2, f2 = inner
    return (
        a1 * a2 + c1 * b2,
        b1 * a2 + d1 * b2,
        a1 * c2 + c1 * d2,
        b1 * c2 + d1 * d2,
        a1 * e2 + c1 * f2 + e1,
        b1 * e2 + d1 * f2 + f1,
    )


def apply(m: Affine, x: float, y: float) -> Point:
    if m == IDENTITY:
        return (x, y)
    a, b, c, d, e, f = m
    return (a * x + c * y + e, b * x + d * y + f)


def determinant(m: Affine) -> float:
    return m[0] * m[3] - m[1] * m[2]


def translate(tx: float, ty: float = 0.0) -> Affine:
    return (1.0, 0.0, 0.0, 1.0, float(tx), float(ty))


def scale(sx: float, sy: float | None = None) -> Affine:
    return (float(sx), 0.0, 0.0, float(sx if sy is None else sy), 0.0, 0.0)


def rotate(deg: float, cx: float = 0.0, cy: float = 0.0) -> Affine:
    t = math.radians(deg)
    r = (math.cos(t), math.sin(t), -math.sin(t), math.cos(t), 0.0, 0.0)
    if cx or cy:
        return compose(translate(cx, cy), compose(r, translate(-cx, -cy)))
    return r


@dataclass(frozen=True)
class Rgba:
    r: int
    g: int
    b: int
    a: int = 255

    def __post_init__(self):
        for v in (self.r, self.g, self.b, self.a):
            if not 0 <= v <= 255:
                raise ValueError(f"channel out of range: {self}")

    @property
    def rgb(self) -> tuple[int, int, int]:
        return (self.r, self.g, self.b)

    def hex(self) -> str:
        return "#{:02x}{:02x}{:02x}".format(self.r, self.g, self.b)

    def with_alpha_scaled(self, factor: float) -> "Rgba":
        return replace(self, a=int(round(self.a * max(0.0, min(1.0, factor)))))


BLACK = Rgba(0, 0, 0, 255)
WHITE = Rgba(255, 255, 255, 255)


@dataclass(frozen=True)
class LineTo:
    x: float
    y: float

    @property
    def end(self) -> Point:
        return (self.x, self.y)

    def transformed(self, m: Affine) -> "LineTo":
        return LineTo(*apply(m, self.x, self.y))


@dataclass(frozen=True)
class CubicTo:
    x1: float
    y1: float
    x2: float
    y2: float
    x: float
    y: float

    @property
    def end(self) -> Point:
        return (self.x, self.y)

    def transformed(self, m: Affine) -> "CubicTo":
        return CubicTo(*apply(m, self.x1, self.y1), *apply(m, self.x2, self.y2), *apply(m, self.x, self.y))


Segment = Union[LineTo, CubicTo]


@dataclass(frozen=True)
class Subpath:
    start: Point
    segments: tuple[Segment, ...] = ()
    closed: bool = False

    def transformed(self, m: Affine) -> "Subpath":
        return Subpath(apply(m, *self.start), tuple(s.transformed(m) for s in self.segments), self.closed)

    def points(self) -> Iterator[Point]:
        """All coordinates, control points included."""
        yield self.start
        for s in self.segments:
            if isinstance(s, CubicTo):
                yield (s.x1, s.y1)
                yield (s.x2, s.y2)
            yield s.end


@dataclass(frozen=True)
class PathData:
    subpaths: tuple[Subpath, ...] = ()

    def transformed(self, m: Affine) -> "PathData":
        if m == IDENTITY:
            return self
        return PathData(tuple(sp.transformed(m) for sp in self.subpaths))

    def points(self) -> Iterator[Point]:
        for sp in self.subpaths:
            yield from sp.points()

    def bbox(self) -> tuple[float, float, float, float] | None:
        """Control-point bounding box (a superset of the curve's extent)."""
        pts = list(self.points())
        if not pts:
            return None
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        return (min(xs), min(ys), max(xs), max(ys))

    def to_d(self, digits: int = 2) -> str:
        out = []
        for sp in self.subpaths:
            out.append("M" + _fmt_pt(sp.start, digits))
            for s in sp.segments:
                if isinstance(s, LineTo):
                    out.append("L" + _fmt_pt(s.end, digits))
                else:
                    out.append(
                        "C" + " ".join(_fmt_pt(p, digits) for p in ((s.x1, s.y1), (s.x2, s.y2), s.end))
                    )
            if sp.closed:
                out.append("Z")
        return "".join(out)


@dataclass(frozen=True)
class StrokeStyle:
    color: Rgba
    width: float = 1.0


@dataclass(frozen=True)
class Path:
    data: PathData
    fill: Rgba | None = BLACK
    stroke: StrokeStyle | None = None
    fill_rule: str = "nonzero"

    def __post_init__(self):
        if self.fill is None and self.stroke is None:
            raise ValueError("a path needs a fill or a stroke")
        if self.fill_rule not in ("nonzero", "evenodd"):
            raise ValueError(f"bad fill rule {self.fill_rule!r}")


@dataclass(frozen=True)
class Group:
    children: tuple["Node", ...] = ()
    id: str | None = None
    transform: Affine = IDENTITY


Node = Union[Group, Path]


@dataclass(frozen=True)
class SvgDocument:
    width: float
    height: float
    root: tuple[Node, ...] = ()
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError("document dimensions must be positive")

    def with_root(self, root) -> "SvgDocument":
        return replace(self, root=tuple(root))


@dataclass(frozen=True)
class Layer:
    id: int
    node: Node


def iter_paths(nodes) -> Iterator[Path]:
    """Paths in paint order (depth first)."""
    for n in nodes:
        if isinstance(n, Path):
            yield n
        else:
            yield from iter_paths(n.children)


def _transform_path(p: Path, m: Affine) -> Path:
    if m == IDENTITY:
        return p
    stroke = p.stroke
    if stroke is not None:
        stroke = replace(stroke, width=stroke.width * math.sqrt(abs(determinant(m))))
    return replace(p, data=p.data.transformed(m), stroke=stroke)


def _flatten_node(node: Node, m: Affine) -> Node:
    if isinstance(node, Path):
        return _transform_path(node, m)
    if determinant(node.transform) == 0:
        raise SingularTransform(f"singular transform on group {node.id!r}: {node.transform}")
    inner = compose(m, node.transform) if node.transform != IDENTITY else m
    return Group(tuple(_flatten_node(c, inner) for c in node.children), node.id, IDENTITY)


def flatten_transforms(doc: SvgDocument) -> SvgDocument:
    """Push every group transform down into path coordinates."""
    return doc.with_root(_flatten_node(n, IDENTITY) for n in doc.root)


def enumerate_layers(doc: SvgDocument) -> list[Layer]:
    """One layer per top-level node, in paint order."""
    if not doc.root:
        raise EmptyDocument("document has no top-level content")
    return [Layer(i, n) for i, n in enumerate(doc.root)]


def transform_node(node: Node, m: Affine) -> Node:
    """Prepend ``m`` to a node: composed into a group, applied to a bare path."""
    if m == IDENTITY:
        return node
    if isinstance(node, Path):
        return _transform_path(node, m)
    return replace(node, transform=compose(m, node.transform))


# -- serialization ---------------------------------------------------------


def _fmt(v: float, digits: int = 2) -> str:
    s = f"{v:.{digits}f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "", "-") else s


def _fmt_pt(p: Point, digits: int = 2) -> str:
    return f"{_fmt(p[0], digits)} {_fmt(p[1], digits)}"


def _paint_attrs(p: Path) -> str:
    parts = []
    if p.fill is None:
        parts.append('fill="none"')
    else:
        parts.append(f'fill="{p.fill.hex()}"')
        if p.fill.a != 255:
            parts.append(f'fill-opacity="{_fmt(p.fill.a / 255, 4)}"')
        if p.fill_rule == "evenodd":
            parts.append('fill-rule="evenodd"')
    if p.stroke is not None:
        parts.append(f'stroke="{p.stroke.color.hex()}"')
        parts.append(f'stroke-width="{_fmt(p.stroke.width)}"')
        if p.stroke.color.a != 255:
            parts.append(f'stroke-opacity="{_fmt(p.stroke.color.a / 255, 4)}"')
        parts.append('stroke-linejoin="miter" stroke-miterlimit="4" stroke-linecap="butt"')
    return " ".join(parts)


def _write_node(node: Node, out: list[str], indent: str, gid: str | None) -> None:
    if isinstance(node, Path):
        out.append(f'{indent}<path d="{node.data.to_d()}" {_paint_attrs(node)}/>')
        return
    attrs = ""
    if gid is not None:
        attrs += f" id={quoteattr(gid)}"
    if node.transform != IDENTITY:
        attrs += ' transform="matrix({})"'.format(" ".join(_fmt(v, 6) for v in node.transform))
    if not node.children:
        out.append(f"{indent}<g{attrs}/>")
        return
    out.append(f"{indent}<g{attrs}>")
    for c in node.children:
        _write_node(c, out, indent + "  ", c.id if isinstance(c, Group) else None)
    out.append(f"{indent}</g>")


def serialize_svg(doc: SvgDocument) -> str:
    """SVG 1.1 text; top-level groups are renamed ``layer-K`` by position."""
    w, h = _fmt(doc.width), _fmt(doc.height)
    head = f'<svg xmlns="{SVG_NS}" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}"'
    if not doc.root:
        return head + "/>\n"
    out = [head + ">"]
    for k, node in enumerate(doc.root):
        _write_node(node, out, "  ", f"layer-{k}")
    out.append("</svg>")
    return "\n".join(out) + "\n"
