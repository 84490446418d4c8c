"""Parse the supported SVG subset into a :class:`SvgDocument`.

Supported: ``svg``, ``g``, ``path``, ``rect``, ``circle``, ``ellipse``,
``polygon``, ``polyline``, ``line`` with solid paints. Quadratic curves and
elliptical arcs are converted to cubics here. Anything else is skipped and
recorded in ``SvgDocument.warnings``.
"""

from __future__ import annotations

import logging
import math
import re
import xml.etree.ElementTree as ET

from PIL import ImageColor

from .errors import MalformedXml, MissingViewport
from .svg_doc import (
    BLACK,
    IDENTITY,
    Affine,
    CubicTo,
    Group,
    LineTo,
    Path,
    PathData,
    Rgba,
    StrokeStyle,
    Subpath,
    SvgDocument,
    compose,
    rotate,
    scale,
    transform_node,
    translate,
)

log = logging.getLogger(__name__)

_SHAPES = {"path", "rect", "circle", "ellipse", "polygon", "polyline", "line"}
_SILENT = {"title", "desc", "metadata"}
_INHERITED = ("fill", "stroke", "stroke-width", "fill-rule", "fill-opacity", "stroke-opacity")
_UNITS = {"px": 1.0, "pt": 96 / 72, "pc": 16.0, "mm": 96 / 25.4, "cm": 96 / 2.54, "in": 96.0}
_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_NUM_RE = re.compile(_NUM)
_LEN_RE = re.compile(rf"^\s*({_NUM})\s*([a-z%]*)\s*$")


def _local(tag) -> str:
    if not isinstance(tag, str):
        return ""
    return tag.rsplit("}", 1)[-1]


def parse_length(text: str | None, default: float | None = None) -> float | None:
    if text is None:
        return default
    m = _LEN_RE.match(text)
    if not m:
        return default
    unit = m.group(2)
    if unit == "%":
        return default
    return float(m.group(1)) * _UNITS.get(unit, 1.0)


# -- colors ----------------------------------------------------------------


def parse_color(text: str) -> Rgba | None:
    """Parse a paint color. ``none``/``transparent`` give ``None``."""
    t = text.strip()
    low = t.lower()
    if low in ("none", "transparent"):
        return None
    if low == "currentcolor":
        return BLACK
    if t.startswith("#") and len(t) in (4, 7, 9):
        h = t[1:]
        if len(h) == 3:
            h = "".join(c * 2 for c in h)
        try:
            vals = [int(h[i : i + 2], 16) for i in range(0, len(h), 2)]
        except ValueError:
            raise ValueError(f"bad color {text!r}") from None
        return Rgba(*vals)
    rgb = ImageColor.getrgb(low)
    return Rgba(*rgb) if len(rgb) == 4 else Rgba(*rgb, 255)


# -- transforms ------------------------------------------------------------

_TF_RE = re.compile(r"(matrix|translate|scale|rotate|skewX|skewY)\s*\(([^)]*)\)")


def parse_transform(text: str | None) -> Affine:
    if not text:
        return IDENTITY
    m = IDENTITY
    for name, args in _TF_RE.findall(text):
        v = [float(x) for x in _NUM_RE.findall(args)]
        if name == "matrix" and len(v) == 6:
            t = tuple(v)
        elif name == "translate" and v:
            t = translate(v[0], v[1] if len(v) > 1 else 0.0)
        elif name == "scale" and v:
            t = scale(v[0], v[1] if len(v) > 1 else None)
        elif name == "rotate" and v:
            t = rotate(v[0], *(v[1:3] if len(v) >= 3 else ()))
        elif name == "skewX" and v:
            t = (1.0, 0.0, math.tan(math.radians(v[0])), 1.0, 0.0, 0.0)
        elif name == "skewY" and v:
            t = (1.0, math.tan(math.radians(v[0])), 0.0, 1.0, 0.0, 0.0)
        else:
            raise ValueError(f"bad transform {name}({args})")
        m = compose(m, t)
    return m


# -- path data -------------------------------------------------------------


class _Scanner:
    _ws = re.compile(r"[\s,]*")
    _num = re.compile(_NUM)
    _flag = re.compile(r"[01]")

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip(self) -> None:
        self.pos = self._ws.match(self.text, self.pos).end()

    def done(self) -> bool:
        self.skip()
        return self.pos >= len(self.text)

    def peek_command(self) -> str | None:
        self.skip()
        if self.pos < len(self.text) and self.text[self.pos].isalpha():
            return self.text[self.pos]
        return None

    def command(self) -> str:
        c = self.peek_command()
        if c is None:
            raise ValueError(f"expected command at {self.pos} in {self.text!r}")
        self.pos += 1
        return c

    def has_number(self) -> bool:
        self.skip()
        return bool(self._num.match(self.text, self.pos))

    def number(self) -> float:
        self.skip()
        m = self._num.match(self.text, self.pos)
        if not m:
            raise ValueError(f"expected number at {self.pos} in {self.text!r}")
        self.pos = m.end()
        return float(m.group())

    def flag(self) -> bool:
        self.skip()
        m = self._flag.match(self.text, self.pos)
        if not m:
            raise ValueError(f"expected arc flag at {self.pos} in {self.text!r}")
        self.pos = m.end()
        return m.group() == "1"


def arc_to_cubics(x1, y1, rx, ry, phi_deg, large, sweep, x2, y2) -> list[CubicTo]:
    """Endpoint-parameterized elliptical arc as cubics of at most 90° each."""
    if (x1, y1) == (x2, y2):
        return []
    rx, ry = abs(rx), abs(ry)
    if rx == 0 or ry == 0:
        return [CubicTo(x1 + (x2 - x1) / 3, y1 + (y2 - y1) / 3, x1 + 2 * (x2 - x1) / 3, y1 + 2 * (y2 - y1) / 3, x2, y2)]
    phi = math.radians(phi_deg % 360)
    cp, sp = math.cos(phi), math.sin(phi)
    dx, dy = (x1 - x2) / 2, (y1 - y2) / 2
    x1p = cp * dx + sp * dy
    y1p = -sp * dx + cp * dy
    lam = (x1p / rx) ** 2 + (y1p / ry) ** 2
    if lam > 1:
        s = math.sqrt(lam)
        rx, ry = rx * s, ry * s
    num = rx * rx * ry * ry - rx * rx * y1p * y1p - ry * ry * x1p * x1p
    den = rx * rx * y1p * y1p + ry * ry * x1p * x1p
    coef = math.sqrt(max(0.0, num / den)) if den else 0.0
    if large == sweep:
        coef = -coef
    cxp = coef * rx * y1p / ry
    cyp = -coef * ry * x1p / rx
    cx = cp * cxp - sp * cyp + (x1 + x2) / 2
    cy = sp * cxp + cp * cyp + (y1 + y2) / 2

    def angle(ux, uy, vx, vy):
        a = math.atan2(ux * vy - uy * vx, ux * vx + uy * vy)
        return a

    ux, uy = (x1p - cxp) / rx, (y1p - cyp) / ry
    vx, vy = (-x1p - cxp) / rx, (-y1p - cyp) / ry
    theta1 = angle(1, 0, ux, uy)
    dtheta = angle(ux, uy, vx, vy)
    if not sweep and dtheta > 0:
        dtheta -= 2 * math.pi
    elif sweep and dtheta < 0:
        dtheta += 2 * math.pi

    n = max(1, math.ceil(abs(dtheta) / (math.pi / 2) - 1e-9))
    step = dtheta / n
    k = 4 / 3 * math.tan(step / 4)
    out = []

    def pt(t):
        ct, st = math.cos(t), math.sin(t)
        return (cx + rx * ct * cp - ry * st * sp, cy + rx * ct * sp + ry * st * cp)

    def deriv(t):
        ct, st = math.cos(t), math.sin(t)
        return (-rx * st * cp - ry * ct * sp, -rx * st * sp + ry * ct * cp)

    t = theta1
    for i in range(n):
        t2 = t + step
        p0, p3 = pt(t), pt(t2)
        d0, d3 = deriv(t), deriv(t2)
        if i == n - 1:
            p3 = (x2, y2)
        out.append(
            CubicTo(p0[0] + k * d0[0], p0[1] + k * d0[1], p3[0] - k * d3[0], p3[1] - k * d3[1], p3[0], p3[1])
        )
        t = t2
    return out


def parse_path_data(d: str) -> PathData:
    """Parse a ``d`` attribute into absolute move/line/cubic/close form."""
    sc = _Scanner(d)
    subpaths: list[Subpath] = []
    start = None
    segs: list = []
    cx = cy = 0.0
    sx = sy = 0.0
    last_ctrl = None  # reflected control point for S/T
    last_cmd = ""

    def flush(closed: bool):
        nonlocal start, segs
        if start is not None:
            subpaths.append(Subpath(start, tuple(segs), closed))
        start, segs = None, []

    def ensure_start():
        nonlocal start
        if start is None:
            start = (cx, cy)

    while not sc.done():
        cmd = sc.command()
        rel = cmd.islower()
        up = cmd.upper()
        if up == "Z":
            if start is not None:
                flush(True)
            cx, cy = sx, sy
            last_ctrl, last_cmd = None, "Z"
            continue
        first = True
        while first or sc.has_number():
            ox, oy = (cx, cy) if rel else (0.0, 0.0)
            if up == "M":
                x, y = sc.number() + ox, sc.number() + oy
                if first:
                    flush(False)
                    start = (x, y)
                    sx, sy = x, y
                else:
                    ensure_start()
                    segs.append(LineTo(x, y))
                cx, cy = x, y
                last_ctrl = None
            elif up in ("L", "H", "V"):
                if up == "L":
                    x, y = sc.number() + ox, sc.number() + oy
                elif up == "H":
                    x, y = sc.number() + ox, cy
                else:
                    x, y = cx, sc.number() + oy
                ensure_start()
                segs.append(LineTo(x, y))
                cx, cy = x, y
                last_ctrl = None
            elif up in ("C", "S"):
                if up == "C":
                    x1, y1 = sc.number() + ox, sc.number() + oy
                else:
                    if last_ctrl is not None and last_cmd in ("C", "S"):
                        x1, y1 = 2 * cx - last_ctrl[0], 2 * cy - last_ctrl[1]
                    else:
                        x1, y1 = cx, cy
                x2, y2 = sc.number() + ox, sc.number() + oy
                x, y = sc.number() + ox, sc.number() + oy
                ensure_start()
                segs.append(CubicTo(x1, y1, x2, y2, x, y))
                last_ctrl = (x2, y2)
                cx, cy = x, y
            elif up in ("Q", "T"):
                if up == "Q":
                    qx, qy = sc.number() + ox, sc.number() + oy
                else:
                    if last_ctrl is not None and last_cmd in ("Q", "T"):
                        qx, qy = 2 * cx - last_ctrl[0], 2 * cy - last_ctrl[1]
                    else:
                        qx, qy = cx, cy
                x, y = sc.number() + ox, sc.number() + oy
                ensure_start()
                # exact degree elevation
                segs.append(
                    CubicTo(cx + 2 / 3 * (qx - cx), cy + 2 / 3 * (qy - cy), x + 2 / 3 * (qx - x), y + 2 / 3 * (qy - y), x, y)
                )
                last_ctrl = (qx, qy)
                cx, cy = x, y
            elif up == "A":
                rx, ry, phi = sc.number(), sc.number(), sc.number()
                large, sweep = sc.flag(), sc.flag()
                x, y = sc.number() + ox, sc.number() + oy
                ensure_start()
                segs.extend(arc_to_cubics(cx, cy, rx, ry, phi, large, sweep, x, y))
                cx, cy = x, y
                last_ctrl = None
            else:
                raise ValueError(f"unknown path command {cmd!r}")
            last_cmd = up
            first = False
            if up == "M":
                up = "L"  # implicit lineto after moveto
    flush(False)
    return PathData(tuple(subpaths))


# -- basic shapes ----------------------------------------------------------


def _ellipse(cx, cy, rx, ry) -> PathData:
    segs = []
    x, y = cx + rx, cy
    for ex, ey in ((cx, cy + ry), (cx - rx, cy), (cx, cy - ry), (cx + rx, cy)):
        segs.extend(arc_to_cubics(x, y, rx, ry, 0, False, True, ex, ey))
        x, y = ex, ey
    return PathData((Subpath((cx + rx, cy), tuple(segs), True),))


def _rect(x, y, w, h, rx, ry) -> PathData:
    if rx <= 0 and ry <= 0:
        segs = (LineTo(x + w, y), LineTo(x + w, y + h), LineTo(x, y + h), LineTo(x, y))
        return PathData((Subpath((x, y), segs, True),))
    rx = ry if rx <= 0 else rx
    ry = rx if ry <= 0 else ry
    rx, ry = min(rx, w / 2), min(ry, h / 2)
    segs = [LineTo(x + w - rx, y)]
    segs += arc_to_cubics(x + w - rx, y, rx, ry, 0, False, True, x + w, y + ry)
    segs.append(LineTo(x + w, y + h - ry))
    segs += arc_to_cubics(x + w, y + h - ry, rx, ry, 0, False, True, x + w - rx, y + h)
    segs.append(LineTo(x + rx, y + h))
    segs += arc_to_cubics(x + rx, y + h, rx, ry, 0, False, True, x, y + h - ry)
    segs.append(LineTo(x, y + ry))
    segs += arc_to_cubics(x, y + ry, rx, ry, 0, False, True, x + rx, y)
    return PathData((Subpath((x + rx, y), tuple(segs), True),))


def _points(text: str) -> list[tuple[float, float]]:
    nums = [float(v) for v in _NUM_RE.findall(text or "")]
    return list(zip(nums[0::2], nums[1::2]))


def _shape_data(tag: str, el: ET.Element) -> PathData | None:
    g = lambda k, d=0.0: parse_length(el.get(k), d)  # noqa: E731
    if tag == "path":
        return parse_path_data(el.get("d", ""))
    if tag == "rect":
        w, h = g("width"), g("height")
        if w <= 0 or h <= 0:
            return None
        return _rect(g("x"), g("y"), w, h, g("rx", -1.0), g("ry", -1.0))
    if tag == "circle":
        r = g("r")
        return _ellipse(g("cx"), g("cy"), r, r) if r > 0 else None
    if tag == "ellipse":
        rx, ry = g("rx"), g("ry")
        return _ellipse(g("cx"), g("cy"), rx, ry) if rx > 0 and ry > 0 else None
    if tag in ("polygon", "polyline"):
        pts = _points(el.get("points", ""))
        if len(pts) < 2:
            return None
        return PathData((Subpath(pts[0], tuple(LineTo(*p) for p in pts[1:]), tag == "polygon"),))
    if tag == "line":
        return PathData((Subpath((g("x1"), g("y1")), (LineTo(g("x2"), g("y2")),), False),))
    return None


# -- style -----------------------------------------------------------------


def _style_of(el: ET.Element) -> dict[str, str]:
    style = {k: v for k, v in el.attrib.items() if "}" not in k}
    for decl in el.get("style", "").split(";"):
        if ":" in decl:
            k, v = decl.split(":", 1)
            style[k.strip()] = v.strip()
    return style


class _Ctx:
    def __init__(self):
        self.warnings: list[str] = []

    def warn(self, msg: str) -> None:
        if msg not in self.warnings:
            self.warnings.append(msg)
            log.warning(msg)


def _paint(value: str | None, ctx: _Ctx) -> Rgba | None:
    if value is None:
        return None
    v = value.strip()
    if v.startswith("url("):
        ctx.warn(f"unsupported paint server {v!r}; using fallback")
        rest = v[v.index(")") + 1 :].strip()
        return _paint(rest, ctx) if rest else None
    try:
        return parse_color(v)
    except ValueError:
        ctx.warn(f"unparseable color {v!r}; treated as none")
        return None


def _float(v: str | None, default: float) -> float:
    if v is None:
        return default
    v = v.strip()
    try:
        return float(v[:-1]) / 100 if v.endswith("%") else float(v)
    except ValueError:
        return default


def _make_path(data: PathData, style: dict, opacity: float, ctx: _Ctx) -> Path | None:
    fill = _paint(style.get("fill", "black"), ctx)
    if fill is not None:
        fill = fill.with_alpha_scaled(_float(style.get("fill-opacity"), 1.0) * opacity)
    stroke = None
    sc = _paint(style.get("stroke", "none"), ctx)
    sw = parse_length(style.get("stroke-width"), 1.0)
    if sc is not None and sw and sw > 0:
        sc = sc.with_alpha_scaled(_float(style.get("stroke-opacity"), 1.0) * opacity)
        stroke = StrokeStyle(sc, sw)
    if fill is None and stroke is None:
        return None
    rule = "evenodd" if style.get("fill-rule", "nonzero").strip() == "evenodd" else "nonzero"
    return Path(data, fill, stroke, rule)


def _walk(el: ET.Element, inherited: dict, opacity: float, ctx: _Ctx):
    tag = _local(el.tag)
    style = _style_of(el)
    if style.get("display", "").strip() == "none" or style.get("visibility", "").strip() == "hidden":
        return None
    merged = dict(inherited)
    merged.update({k: style[k] for k in _INHERITED if k in style})
    op = opacity * _float(style.get("opacity"), 1.0)
    try:
        tf = parse_transform(el.get("transform"))
    except ValueError as e:
        ctx.warn(f"ignored transform on <{tag}>: {e}")
        tf = IDENTITY
    if tag in ("g", "a", "svg"):
        kids = [n for c in el if (n := _walk(c, merged, op, ctx)) is not None]
        if tag == "svg":
            ctx.warn("nested <svg> treated as a group")
        return Group(tuple(kids), el.get("id"), tf)
    if tag in _SHAPES:
        try:
            data = _shape_data(tag, el)
        except ValueError as e:
            ctx.warn(f"skipped <{tag}> with bad geometry: {e}")
            return None
        if data is None or not data.subpaths:
            return None
        if "clip-path" in style or "mask" in style or "filter" in style:
            ctx.warn(f"ignored clip-path/mask/filter on <{tag}>")
        p = _make_path(data, merged, op, ctx)
        if p is None:
            return None
        return transform_node(p, tf) if tf != IDENTITY else p
    if tag and tag not in _SILENT:
        ctx.warn(f"unsupported element <{tag}> skipped")
    return None


def parse_svg(text: str | bytes) -> SvgDocument:
    """Parse SVG text. Raises ``MalformedXml`` or ``MissingViewport``."""
    try:
        root = ET.fromstring(text)
    except ET.ParseError as e:
        raise MalformedXml(str(e)) from e
    if _local(root.tag) != "svg":
        raise MalformedXml(f"root element is <{_local(root.tag)}>, not <svg>")
    vb = [float(v) for v in _NUM_RE.findall(root.get("viewBox", ""))]
    vb = vb if len(vb) == 4 and vb[2] > 0 and vb[3] > 0 else None
    width = parse_length(root.get("width"))
    height = parse_length(root.get("height"))
    if width is None or height is None:
        if vb is None:
            raise MissingViewport("svg has neither width/height nor viewBox")
        if width is None and height is None:
            width, height = vb[2], vb[3]
        elif width is None:
            width = height * vb[2] / vb[3]
        else:
            height = width * vb[3] / vb[2]
    if width <= 0 or height <= 0:
        raise MissingViewport("non-positive width/height")

    view = IDENTITY
    if vb is not None:
        s = min(width / vb[2], height / vb[3])  # xMidYMid meet
        ox = (width - vb[2] * s) / 2 - vb[0] * s
        oy = (height - vb[3] * s) / 2 - vb[1] * s
        view = (s, 0.0, 0.0, s, ox, oy)
        if all(abs(a - b) < 1e-12 for a, b in zip(view, IDENTITY)):
            view = IDENTITY

    ctx = _Ctx()
    style = _style_of(root)
    inherited = {k: style[k] for k in _INHERITED if k in style}
    opacity = _float(style.get("opacity"), 1.0)
    nodes = [n for c in root if (n := _walk(c, inherited, opacity, ctx)) is not None]
    nodes = [transform_node(n, view) for n in nodes]
    return SvgDocument(width, height, tuple(nodes), tuple(ctx.warnings))


def load_svg(path) -> SvgDocument:
    with open(path, "rb") as f:
        return parse_svg(f.read())
