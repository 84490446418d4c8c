"""Pixel buffers and a deterministic supersampling scanline rasterizer."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from PIL import Image

from .errors import KOutOfRange, ZeroDimension
from .svg_doc import CubicTo, Layer, Path, PathData, Rgba, SvgDocument, flatten_transforms, iter_paths

SS = 2  # samples per pixel along each axis (2x2 box filter)
FLATNESS = 0.25  # max polyline deviation, output pixels
MITER_LIMIT = 4.0


@dataclass(frozen=True, eq=False)
class RasterImage:
    """Row-major uint8 samples of shape (height, width, channels), channels 1 or 4."""

    data: np.ndarray

    def __post_init__(self):
        d = self.data
        if d.ndim == 2:
            d = d[:, :, None]
        if d.ndim != 3 or d.shape[2] not in (1, 4):
            raise ValueError(f"unsupported image shape {self.data.shape}")
        d = np.ascontiguousarray(d, dtype=np.uint8)
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def tobytes(self) -> bytes:
        return self.data.tobytes()

    def __eq__(self, other) -> bool:
        return isinstance(other, RasterImage) and np.array_equal(self.data, other.data)

    def __repr__(self) -> str:
        return f"RasterImage({self.width}x{self.height}x{self.channels})"

    @classmethod
    def filled(cls, width: int, height: int, color: Rgba | tuple) -> "RasterImage":
        c = color.rgb + (color.a,) if isinstance(color, Rgba) else tuple(color)
        arr = np.empty((height, width, len(c)), np.uint8)
        arr[:] = c
        return cls(arr)

    @classmethod
    def from_pil(cls, im: Image.Image) -> "RasterImage":
        if im.mode == "L":
            return cls(np.asarray(im))
        return cls(np.asarray(im.convert("RGBA")))

    def to_pil(self) -> Image.Image:
        if self.channels == 1:
            return Image.fromarray(self.data[:, :, 0], "L")
        return Image.fromarray(self.data, "RGBA")

    def save_png(self, path) -> None:
        self.to_pil().save(path, format="PNG")

    @classmethod
    def load_png(cls, path) -> "RasterImage":
        with Image.open(path) as im:
            im.load()
            return cls.from_pil(im)


# -- geometry flattening ---------------------------------------------------


def _cubic_points(p0, c: CubicTo, tol: float) -> list[tuple[float, float]]:
    x0, y0 = p0
    ddx = max(abs(x0 - 2 * c.x1 + c.x2), abs(c.x1 - 2 * c.x2 + c.x))
    ddy = max(abs(y0 - 2 * c.y1 + c.y2), abs(c.y1 - 2 * c.y2 + c.y))
    dd = math.hypot(ddx, ddy)
    # chord error of a uniform n-split is bounded by 3*dd / (4 n^2)
    n = max(1, math.ceil(math.sqrt(3 * dd / (4 * tol)))) if dd > 0 else 1
    n = min(n, 1000)
    t = np.arange(1, n + 1) / n
    mt = 1 - t
    xs = mt**3 * x0 + 3 * mt**2 * t * c.x1 + 3 * mt * t**2 * c.x2 + t**3 * c.x
    ys = mt**3 * y0 + 3 * mt**2 * t * c.y1 + 3 * mt * t**2 * c.y2 + t**3 * c.y
    pts = list(zip(xs.tolist(), ys.tolist()))
    pts[-1] = (c.x, c.y)
    return pts


def flatten_path(data: PathData, tol: float = FLATNESS) -> list[tuple[np.ndarray, bool]]:
    """Polylines ``(points[N, 2], closed)`` approximating each subpath."""
    out = []
    for sp in data.subpaths:
        pts = [sp.start]
        cur = sp.start
        for s in sp.segments:
            if isinstance(s, CubicTo):
                pts.extend(_cubic_points(cur, s, tol))
            else:
                pts.append(s.end)
            cur = s.end
        out.append((np.asarray(pts, dtype=float), sp.closed))
    return out


def _signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _positive(poly) -> np.ndarray:
    poly = np.asarray(poly, dtype=float)
    return poly[::-1] if _signed_area(poly) < 0 else poly


def stroke_polygons(pts: np.ndarray, closed: bool, width: float) -> list[np.ndarray]:
    """Outline of a stroked polyline as positively oriented polygons.

    Filling their union with the nonzero rule paints the stroke: one quad
    per segment, butt caps, miter joins with bevel fallback past the limit.
    """
    h = width / 2
    # drop repeated points
    keep = np.ones(len(pts), bool)
    keep[1:] = np.any(np.diff(pts, axis=0) != 0, axis=1)
    pts = pts[keep]
    if closed and len(pts) > 1 and np.array_equal(pts[0], pts[-1]):
        pts = pts[:-1]
    if len(pts) < 2:
        return []
    seq = np.vstack([pts, pts[:1]]) if closed else pts
    d = np.diff(seq, axis=0)
    d = d / np.hypot(d[:, 0], d[:, 1])[:, None]
    n = np.stack([-d[:, 1], d[:, 0]], axis=1) * h
    polys = []
    for i in range(len(d)):
        p, q = seq[i], seq[i + 1]
        polys.append(_positive([p + n[i], q + n[i], q - n[i], p - n[i]]))
    joins = range(len(d)) if closed else range(1, len(d))
    for j in joins:
        a, b = (j - 1) % len(d), j
        v = seq[j]
        cross = d[a, 0] * d[b, 1] - d[a, 1] * d[b, 0]
        if abs(cross) < 1e-12:
            continue
        sgn = -1.0 if cross > 0 else 1.0
        p1, p2 = v + sgn * n[a], v + sgn * n[b]
        ua, ub = n[a] / h, n[b] / h
        m = (ua + ub) / (1 + float(np.dot(ua, ub)))
        if np.hypot(*m) <= MITER_LIMIT:
            polys.append(_positive([v, p1, v + sgn * h * m, p2]))
        else:
            polys.append(_positive([v, p1, p2]))
    return polys


# -- scanline coverage -----------------------------------------------------


def coverage_mask(rings: Sequence[np.ndarray], rule: str, width: int, height: int) -> tuple[np.ndarray, int, int] | None:
    """Per-pixel coverage in {0, .25, .5, .75, 1} for closed rings in pixel units.

    Returns ``(coverage, x0, y0)`` for the pixel bounding box, or ``None``
    when nothing is covered.
    """
    edges = []
    for r in rings:
        if len(r) < 2:
            continue
        a = r * SS
        b = np.roll(a, -1, axis=0)
        edges.append(np.hstack([a, b]))
    if not edges:
        return None
    e = np.vstack(edges)
    e = e[e[:, 1] != e[:, 3]]
    if not len(e):
        return None
    W2, H2 = width * SS, height * SS
    down = e[:, 3] > e[:, 1]
    ya = np.where(down, e[:, 1], e[:, 3])
    yb = np.where(down, e[:, 3], e[:, 1])
    # sample row j (center j + .5) is crossed when ya <= j + .5 < yb
    r0 = np.clip(np.ceil(ya - 0.5), 0, H2).astype(np.int64)
    r1 = np.clip(np.ceil(yb - 0.5), 0, H2).astype(np.int64)
    cnt = r1 - r0
    ok = cnt > 0
    if not ok.any():
        return None
    e, r0, cnt, down = e[ok], r0[ok], cnt[ok], down[ok]
    idx = np.repeat(np.arange(len(e)), cnt)
    offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
    rows = r0[idx] + offs
    x0, y0, x1, y1 = e[idx, 0], e[idx, 1], e[idx, 2], e[idx, 3]
    yc = rows + 0.5
    xs = x0 + (yc - y0) * (x1 - x0) / (y1 - y0)
    wind = np.where(down[idx], 1, -1)
    order = np.lexsort((xs, rows))
    rows, xs, wind = rows[order], xs[order], wind[order]
    # every closed ring crosses a row an even number of times with zero net
    # winding, so running sums reset at row boundaries
    if rule == "evenodd":
        inside = (np.arange(1, len(rows) + 1) % 2) == 1
    else:
        inside = np.cumsum(wind) != 0
    sel = np.nonzero(inside[:-1] & (rows[:-1] == rows[1:]))[0]
    if not len(sel):
        return None
    srow = rows[sel]
    xa = np.clip(np.ceil(xs[sel] - 0.5), 0, W2).astype(np.int64)
    xb = np.clip(np.ceil(xs[sel + 1] - 0.5), 0, W2).astype(np.int64)
    good = xb > xa
    srow, xa, xb = srow[good], xa[good], xb[good]
    if not len(srow):
        return None
    ry0 = int(srow.min()) // SS * SS
    ry1 = (int(srow.max()) // SS + 1) * SS
    cx0 = int(xa.min()) // SS * SS
    cx1 = -(-int(xb.max()) // SS) * SS
    diff = np.zeros((ry1 - ry0, cx1 - cx0 + 1), np.int32)
    np.add.at(diff, (srow - ry0, xa - cx0), 1)
    np.add.at(diff, (srow - ry0, xb - cx0), -1)
    hit = np.cumsum(diff[:, :-1], axis=1) > 0
    h, w = hit.shape
    cov = hit.reshape(h // SS, SS, w // SS, SS).mean(axis=(1, 3))
    return cov, cx0 // SS, ry0 // SS


# -- rendering -------------------------------------------------------------


class _Canvas:
    """Premultiplied float RGBA accumulator."""

    def __init__(self, width: int, height: int, background: Rgba | None):
        self.rgb = np.zeros((height, width, 3))
        self.a = np.zeros((height, width))
        if background is not None and background.a:
            ba = background.a / 255
            self.rgb[:] = np.array(background.rgb) / 255 * ba
            self.a[:] = ba

    def paint(self, cov_info, color: Rgba) -> None:
        if cov_info is None or color.a == 0:
            return
        cov, x0, y0 = cov_info
        h, w = cov.shape
        sa = cov * (color.a / 255)
        sl = (slice(y0, y0 + h), slice(x0, x0 + w))
        src = np.array(color.rgb) / 255
        self.rgb[sl] = src * sa[:, :, None] + self.rgb[sl] * (1 - sa)[:, :, None]
        self.a[sl] = sa + self.a[sl] * (1 - sa)

    def image(self) -> RasterImage:
        a = self.a
        with np.errstate(invalid="ignore", divide="ignore"):
            rgb = np.where(a[:, :, None] > 0, self.rgb / a[:, :, None], 0.0)
        out = np.empty(a.shape + (4,), np.uint8)
        out[:, :, :3] = np.floor(np.clip(rgb, 0, 1) * 255 + 0.5)
        out[:, :, 3] = np.floor(np.clip(a, 0, 1) * 255 + 0.5)
        return RasterImage(out)


def _paint_path(canvas: _Canvas, p: Path, sx: float, sy: float, w: int, h: int) -> None:
    tol = FLATNESS / max(sx, sy)
    lines = flatten_path(p.data, tol)
    s = np.array([sx, sy])
    if p.fill is not None:
        rings = [pts * s for pts, _ in lines if len(pts) >= 3]
        canvas.paint(coverage_mask(rings, p.fill_rule, w, h), p.fill)
    if p.stroke is not None:
        sw = p.stroke.width * math.sqrt(sx * sy)
        polys = []
        for pts, closed in lines:
            polys.extend(stroke_polygons(pts * s, closed, sw))
        canvas.paint(coverage_mask(polys, "nonzero", w, h), p.stroke.color)


def render_nodes(nodes, doc_w: float, doc_h: float, width: int, height: int, background: Rgba | None) -> RasterImage:
    if width <= 0 or height <= 0:
        raise ZeroDimension(f"cannot render at {width}x{height}")
    canvas = _Canvas(width, height, background)
    sx, sy = width / doc_w, height / doc_h
    for p in iter_paths(nodes):
        _paint_path(canvas, p, sx, sy, width, height)
    return canvas.image()


def render(doc: SvgDocument, width: int, height: int, background: Rgba | None = None) -> RasterImage:
    """Rasterize ``doc`` scaled to ``width`` x ``height`` pixels.

    ``background=None`` leaves uncovered pixels transparent. Group
    transforms are honored (the document is flattened first).
    """
    if width <= 0 or height <= 0:
        raise ZeroDimension(f"cannot render at {width}x{height}")
    doc = flatten_transforms(doc)
    return render_nodes(doc.root, doc.width, doc.height, width, height, background)


def render_cumulative(
    layers: Sequence[Layer], k: int, width: int, height: int, background: Rgba | None = None, *, doc_size=None
) -> RasterImage:
    """Render layers ``0..k-1`` together.

    ``doc_size`` is the user-space ``(width, height)`` of the source
    document; it defaults to the output size.
    """
    if not 1 <= k <= len(layers):
        raise KOutOfRange(f"k={k} outside 1..{len(layers)}")
    dw, dh = doc_size if doc_size is not None else (width, height)
    nodes = [flatten_transforms(SvgDocument(dw, dh, (l.node,))).root[0] for l in layers[:k]]
    return render_nodes(nodes, dw, dh, width, height, background)
