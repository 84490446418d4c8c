"""Raster layer to filled Bézier paths.

Chain: color quantization, speckle absorption, 4-connected components,
pixel-boundary contours with holes, staircase smoothing, Douglas-Peucker
simplification, corner-aware least-squares cubic fitting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError

from .errors import DegeneratePolygon, DimensionMismatch, TooFewPoints
from .raster import RasterImage
from .svg_doc import CubicTo, Path, PathData, Rgba, Subpath

OPAQUE_ALPHA = 128
TANGENT_REACH = 4.0  # pixels
SMOOTH_PASSES = 2
_CROSS = ndimage.generate_binary_structure(2, 1)
_SQUARE = np.ones((3, 3), bool)


@dataclass(frozen=True)
class TraceConfig:
    color_precision: int = 6
    cluster_merge_delta: int = 16
    speckle_area: int = 16
    simplify_epsilon: float = 1.0
    corner_angle: float = 60.0
    max_fit_error: float = 0.3

    def __post_init__(self):
        if not 1 <= self.color_precision <= 8:
            raise ValueError("color_precision must lie in [1, 8]")
        for name in ("cluster_merge_delta", "speckle_area", "simplify_epsilon", "corner_angle", "max_fit_error"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True, eq=False)
class Component:
    color_index: int
    mask: np.ndarray  # cropped boolean mask
    x0: int
    y0: int

    @property
    def area(self) -> int:
        return int(self.mask.sum())

    @classmethod
    def from_full_mask(cls, color_index: int, mask: np.ndarray) -> "Component":
        ys, xs = np.nonzero(mask)
        y0, y1, x0, x1 = ys.min(), ys.max() + 1, xs.min(), xs.max() + 1
        return cls(color_index, mask[y0:y1, x0:x1].copy(), int(x0), int(y0))


@dataclass
class VectorLayer:
    paths: list[tuple[PathData, Rgba]]

    def __len__(self) -> int:
        return len(self.paths)

    def to_nodes(self) -> list[Path]:
        return [Path(d, fill, None, "evenodd") for d, fill in self.paths]


# -- colors ----------------------------------------------------------------


def quantize_colors(layer: RasterImage, cfg: TraceConfig = TraceConfig()) -> tuple[list[Rgba], np.ndarray]:
    """Cluster opaque pixel colors.

    Returns the palette (largest cluster first) and an int32 label map with
    -1 for transparent pixels.
    """
    d = layer.data
    if layer.channels == 1:
        d = np.concatenate([np.repeat(d, 3, axis=2), np.full(d.shape, 255, np.uint8)], axis=2)
    labels = np.full(layer.shape, -1, np.int32)
    opaque = d[:, :, 3] >= OPAQUE_ALPHA
    if not opaque.any():
        return [], labels
    rgb = d[opaque][:, :3].astype(np.int64)
    shift = 8 - cfg.color_precision
    q = rgb >> shift
    keys = (q[:, 0] << 16) | (q[:, 1] << 8) | q[:, 2]
    ukeys, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
    sums = np.zeros((len(ukeys), 3))
    np.add.at(sums, inverse, rgb)
    means = sums / counts[:, None]

    order = np.lexsort((ukeys, -counts))
    c_sum = np.zeros((0, 3))
    c_cnt = np.zeros(0)
    bucket_to_cluster = np.empty(len(ukeys), np.int64)
    for b in order:
        if len(c_cnt):
            cm = c_sum / c_cnt[:, None]
            dist = np.abs(cm - means[b]).max(axis=1)
            j = int(np.argmin(dist))
            if dist[j] <= cfg.cluster_merge_delta:
                c_sum[j] += sums[b]
                c_cnt[j] += counts[b]
                bucket_to_cluster[b] = j
                continue
        c_sum = np.vstack([c_sum, sums[b]])
        c_cnt = np.append(c_cnt, counts[b])
        bucket_to_cluster[b] = len(c_cnt) - 1
    palette = [Rgba(*(int(v) for v in np.floor(s / n + 0.5)), 255) for s, n in zip(c_sum, c_cnt)]
    labels[opaque] = bucket_to_cluster[inverse]
    return palette, labels


def absorb_speckles(layer: RasterImage, palette: list[Rgba], labels: np.ndarray, speckle_area: int) -> np.ndarray:
    """Hand pixels of weak components to the closest-colored neighbor.

    A component is weak when it is smaller than ``speckle_area``, or when it
    has almost no interior and borders another color (anti-aliasing bands
    along edges). Folding these
    into adjacent regions keeps coverage instead of leaving slivers. Weak
    pixels with no strong region to join are dropped (label -1).
    """
    if speckle_area <= 1 or not palette:
        return labels
    small = np.zeros(labels.shape, bool)
    core_min = max(1, speckle_area // 4)
    opaque = labels >= 0
    for k in range(len(palette)):
        m = labels == k
        lab, n = ndimage.label(m, structure=_CROSS)
        if not n:
            continue
        size = np.bincount(lab.ravel(), minlength=n + 1)
        core = np.bincount(lab[ndimage.binary_erosion(m, _CROSS)], minlength=n + 1)
        # thin parts only count as fringe when they border another color;
        # an isolated hairline is real content
        touch = np.bincount(lab[m & ndimage.binary_dilation(opaque & ~m, _CROSS)], minlength=n + 1)
        weak = (size < speckle_area) | ((core < core_min) & (touch > 0))
        weak[0] = False
        small |= weak[lab]
    if not small.any():
        return labels
    labels = labels.copy()
    settled = (labels >= 0) & ~small
    pal = np.array([p.rgb for p in palette], dtype=np.float64)
    rgb = layer.data[:, :, :3].astype(np.float64)
    h, w = labels.shape
    while True:
        todo = small & ~settled
        if not todo.any():
            break
        best_d = np.full((h, w), np.inf)
        best_l = np.full((h, w), -1, np.int32)
        for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            nl = np.full((h, w), -1, np.int32)
            ns = np.zeros((h, w), bool)
            ys = slice(max(dy, 0), h + min(dy, 0))
            yd = slice(max(-dy, 0), h + min(-dy, 0))
            xs = slice(max(dx, 0), w + min(dx, 0))
            xd = slice(max(-dx, 0), w + min(-dx, 0))
            nl[yd, xd] = labels[ys, xs]
            ns[yd, xd] = settled[ys, xs]
            ok = todo & ns & (nl >= 0)
            if not ok.any():
                continue
            dist = np.full((h, w), np.inf)
            dist[ok] = np.abs(pal[nl[ok]] - rgb[ok]).max(axis=1)
            better = dist < best_d
            best_d[better] = dist[better]
            best_l[better] = nl[better]
        grab = todo & (best_l >= 0)
        if not grab.any():
            break
        labels[grab] = best_l[grab]
        settled |= grab
    labels[small & ~settled] = -1
    return labels


def extract_components(labels: np.ndarray, cfg: TraceConfig = TraceConfig()) -> list[Component]:
    """4-connected regions per palette index, speckles removed."""
    comps = []
    if labels.size == 0 or labels.max() < 0:
        return comps
    for k in range(int(labels.max()) + 1):
        lab, n = ndimage.label(labels == k, structure=_CROSS)
        for i, sl in enumerate(ndimage.find_objects(lab), start=1):
            if sl is None:
                continue
            m = lab[sl] == i
            if m.sum() < cfg.speckle_area:
                continue
            comps.append(Component(k, m, sl[1].start, sl[0].start))
    return comps


# -- contours --------------------------------------------------------------

# screen directions, clockwise: E S W N
_DIRS = ((1, 0), (0, 1), (-1, 0), (0, -1))


def signed_area(poly) -> float:
    """Shoelace area; positive for the orientation used by outer rings."""
    p = np.asarray(poly, dtype=np.float64)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _boundary_rings(mask: np.ndarray) -> list[np.ndarray]:
    """Closed lattice rings around a boolean mask, foreground on the right."""
    m = np.pad(mask, 1)
    H, W = m.shape
    fg = m[1:-1, 1:-1]
    r, c = np.nonzero(fg)
    r = r + 1
    c = c + 1
    out: dict[int, list[int]] = {}
    stride = W + 1

    def add(sel, x0, y0, d):
        for x, y in zip(x0[sel].tolist(), y0[sel].tolist()):
            out.setdefault(y * stride + x, []).append(d)

    add(~m[r - 1, c], c, r, 0)  # top edge heads E from (c, r)
    add(~m[r, c + 1], c + 1, r, 1)  # right edge heads S from (c+1, r)
    add(~m[r + 1, c], c + 1, r + 1, 2)  # bottom edge heads W from (c+1, r+1)
    add(~m[r, c - 1], c, r + 1, 3)  # left edge heads N from (c, r+1)

    # every ring has a convex corner with a single outgoing edge; starting
    # there makes "back at the start vertex" an unambiguous stop
    starts = sorted(k for k, v in out.items() if len(v) == 1)
    rings = []
    for key in starts:
        if not out[key]:
            continue
        x, y = key % stride, key // stride
        pts = []
        prev = None
        while True:
            edges = out[y * stride + x]
            if prev is None:
                d = edges[0]
            else:
                # prefer turning toward the foreground: 4-connected regions
                for turn in (1, 0, 3):
                    d = (prev + turn) % 4
                    if d in edges:
                        break
            edges.remove(d)
            if d != prev:
                pts.append((x, y))
            prev = d
            x += _DIRS[d][0]
            y += _DIRS[d][1]
            if y * stride + x == key:
                break
        arr = np.asarray(pts, dtype=np.int64) - 1
        rings.append(_drop_collinear(arr))
    return rings


def _drop_collinear(ring: np.ndarray) -> np.ndarray:
    prev = np.roll(ring, 1, axis=0)
    nxt = np.roll(ring, -1, axis=0)
    cross = (ring[:, 0] - prev[:, 0]) * (nxt[:, 1] - ring[:, 1]) - (ring[:, 1] - prev[:, 1]) * (nxt[:, 0] - ring[:, 0])
    return ring[cross != 0]


def trace_contours(component: Component) -> list[np.ndarray]:
    """Lattice polygons of a component: outer ring first, then holes.

    Vertices sit on pixel corners (pixel (r, c) spans x in [c, c+1],
    y in [r, r+1]). Outer rings have positive shoelace area, holes negative.
    """
    rings = _boundary_rings(component.mask)
    off = np.array([component.x0, component.y0])
    rings = [r + off for r in rings]
    rings.sort(key=lambda r: -signed_area(r))
    return rings


def _unit_edges(ring: np.ndarray):
    """Split a compressed lattice ring into unit edges.

    Returns ``(starts[N, 2], dirs[N, 2], run_id[N], run_len[R])``.
    """
    ring = np.asarray(ring, dtype=np.int64)
    nxt = np.roll(ring, -1, axis=0)
    delta = nxt - ring
    lengths = np.abs(delta).sum(axis=1)
    dirs = delta // np.maximum(lengths, 1)[:, None]
    run_id = np.repeat(np.arange(len(ring)), lengths)
    k = np.arange(lengths.sum()) - np.repeat(np.cumsum(lengths) - lengths, lengths)
    starts = ring[run_id] + k[:, None] * dirs[run_id]
    return starts, dirs[run_id], run_id, lengths


def boundary_points(ring: np.ndarray, offsets: np.ndarray | None = None, min_corner_run: int = 2) -> np.ndarray:
    """Smooth a lattice ring into one point per unit pixel edge.

    Each point is the edge midpoint pushed ``offsets[k]`` pixels along the
    outward normal. A lattice vertex survives only when both incident runs
    are at least ``min_corner_run`` long, which keeps the corners of
    axis-aligned shapes while dissolving staircases.
    """
    starts, dirs, run_id, lengths = _unit_edges(ring)
    if offsets is None:
        offsets = np.zeros(len(starts))
    normals = np.stack([dirs[:, 1], -dirs[:, 0]], axis=1).astype(np.float64)
    mids = starts + dirs / 2 + offsets[:, None] * normals
    first = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    keep = (lengths >= min_corner_run) & (np.roll(lengths, 1) >= min_corner_run)
    out = []
    for r in range(len(lengths)):
        f = first[r]
        if keep[r]:
            prev = f - 1  # last unit edge of the previous run (wraps to -1)
            out.append(starts[f] + offsets[prev] * normals[prev] + offsets[f] * normals[f])
        out.extend(mids[f : f + lengths[r]])
    return np.asarray(out, dtype=np.float64)


def smooth_staircase(ring: np.ndarray, min_corner_run: int = 2) -> np.ndarray:
    """Replace pixel staircases by edge midpoints (no sub-pixel shift)."""
    ring = np.asarray(ring)
    if len(ring) < 4:
        return ring.astype(np.float64)
    return boundary_points(ring, None, min_corner_run)


def edge_offsets(ring: np.ndarray, rgb: np.ndarray, color, min_contrast: float = 16.0) -> np.ndarray:
    """Sub-pixel outward shift of each unit edge from anti-aliased colors.

    For the pixel just inside and just outside an edge, the fraction of
    ``color`` is estimated by projecting onto the segment between the
    backdrop (two pixels out) and ``color``; the boundary then sits at
    ``inside + outside - 1`` pixels from the lattice line. Transparent
    pixels contribute their RGB as a backdrop hint.
    """
    starts, dirs, _, _ = _unit_edges(ring)
    h, w = rgb.shape[:2]
    n = np.stack([dirs[:, 1], -dirs[:, 0]], axis=1).astype(np.float64)
    mid = starts + dirs / 2

    def pix(centers):
        col = np.floor(centers[:, 0]).astype(np.int64)
        row = np.floor(centers[:, 1]).astype(np.int64)
        ok = (col >= 0) & (col < w) & (row >= 0) & (row < h)
        vals = np.zeros((len(centers), 3))
        vals[ok] = rgb[row[ok], col[ok]]
        return vals, ok

    p_in, ok_in = pix(mid - n / 2)
    p_out, ok_out = pix(mid + n / 2)
    p_bg, ok_bg = pix(mid + 1.5 * n)
    bg = np.where(ok_bg[:, None], p_bg, p_out)
    c = np.asarray(color, dtype=np.float64)
    span = c - bg
    den = (span * span).sum(axis=1)
    good = ok_in & ok_out & (den >= min_contrast**2)
    safe = np.where(good, den, 1.0)
    f_in = np.clip(((p_in - bg) * span).sum(axis=1) / safe, 0, 1)
    f_out = np.clip(((p_out - bg) * span).sum(axis=1) / safe, 0, 1)
    return np.where(good, np.clip(f_in + f_out - 1, -1, 1), 0.0)


# -- simplification --------------------------------------------------------


def _seg_dist(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    L = float(ab @ ab)
    if L == 0:
        return np.hypot(*(p - a).T)
    t = np.clip(((p - a) @ ab) / L, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.hypot(*(p - proj).T)


def _dp_open(pts: np.ndarray, eps: float) -> list[int]:
    keep = [0, len(pts) - 1]
    stack = [(0, len(pts) - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        d = _seg_dist(pts[i + 1 : j], pts[i], pts[j])
        k = int(np.argmax(d))
        if d[k] > eps:
            m = i + 1 + k
            keep.append(m)
            stack.append((i, m))
            stack.append((m, j))
    return sorted(keep)


def _farthest_pair(pts: np.ndarray) -> tuple[int, int]:
    cand = np.arange(len(pts))
    if len(pts) > 3:
        try:
            cand = ConvexHull(pts).vertices
        except QhullError:
            pass
    c = pts[cand]
    d = ((c[:, None, :] - c[None, :, :]) ** 2).sum(-1)
    i, j = np.unravel_index(int(np.argmax(d)), d.shape)
    a, b = sorted((int(cand[i]), int(cand[j])))
    return a, b


def _segments_cross(p1, p2, q1, q2) -> np.ndarray:
    def orient(a, b, c):
        return np.sign((b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0]))

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    return (o1 * o2 < 0) & (o3 * o4 < 0)


def is_simple(poly: np.ndarray) -> bool:
    """No two non-adjacent edges properly cross."""
    n = len(poly)
    if n < 4:
        return True
    a = poly
    b = np.roll(poly, -1, axis=0)
    i, j = np.triu_indices(n, k=2)
    sel = ~((i == 0) & (j == n - 1))
    i, j = i[sel], j[sel]
    return not _segments_cross(a[i], b[i], a[j], b[j]).any()


def simplify_indices(ring: np.ndarray, epsilon: float) -> np.ndarray:
    """Indices of the vertices Douglas-Peucker keeps on a closed ring.

    The ring is split at its two mutually farthest vertices and each half
    is simplified as an open chain. Falls back to every vertex when the
    result would self-intersect.
    """
    n = len(ring)
    if n < 3:
        raise DegeneratePolygon(f"need at least 3 vertices, got {n}")
    if n == 3:
        return np.arange(3)
    a, b = _farthest_pair(ring)
    first = np.arange(a, b + 1)
    second = np.concatenate([np.arange(b, n), np.arange(0, a + 1)])
    k1 = _dp_open(ring[first], epsilon)
    k2 = _dp_open(ring[second], epsilon)
    idx = np.concatenate([first[k1[:-1]], second[k2[:-1]]])
    if len(idx) < 3 or not is_simple(ring[idx]):
        return np.arange(n)
    return idx


def simplify_polygon(poly, epsilon: float) -> np.ndarray:
    """Douglas-Peucker on a closed ring, split at its two farthest vertices."""
    pts = np.asarray(poly, dtype=np.float64)
    if len(pts) > 1 and np.array_equal(pts[0], pts[-1]):
        pts = pts[:-1]
    return pts[simplify_indices(pts, epsilon)]


# -- Bézier fitting --------------------------------------------------------


def _unit(v: np.ndarray) -> np.ndarray:
    n = math.hypot(v[0], v[1])
    return v / n if n > 0 else v


def _bez(ctrl: np.ndarray, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)[:, None]
    mt = 1 - t
    return mt**3 * ctrl[0] + 3 * mt**2 * t * ctrl[1] + 3 * mt * t**2 * ctrl[2] + t**3 * ctrl[3]


def _bez_d1(ctrl, t):
    t = np.asarray(t, dtype=np.float64)[:, None]
    mt = 1 - t
    return 3 * mt**2 * (ctrl[1] - ctrl[0]) + 6 * mt * t * (ctrl[2] - ctrl[1]) + 3 * t**2 * (ctrl[3] - ctrl[2])


def _bez_d2(ctrl, t):
    t = np.asarray(t, dtype=np.float64)[:, None]
    return 6 * (1 - t) * (ctrl[2] - 2 * ctrl[1] + ctrl[0]) + 6 * t * (ctrl[3] - 2 * ctrl[2] + ctrl[1])


def _chord_params(pts: np.ndarray) -> np.ndarray:
    d = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
    return d / d[-1] if d[-1] > 0 else np.linspace(0, 1, len(pts))


def _generate(pts, u, t1, t2) -> np.ndarray:
    p0, p3 = pts[0], pts[-1]
    b0, b1, b2, b3 = (1 - u) ** 3, 3 * (1 - u) ** 2 * u, 3 * (1 - u) * u**2, u**3
    A1 = b1[:, None] * t1
    A2 = b2[:, None] * t2
    C = np.array([[np.sum(A1 * A1), np.sum(A1 * A2)], [np.sum(A1 * A2), np.sum(A2 * A2)]])
    tmp = pts - ((b0 + b1)[:, None] * p0 + (b2 + b3)[:, None] * p3)
    X = np.array([np.sum(A1 * tmp), np.sum(A2 * tmp)])
    det = C[0, 0] * C[1, 1] - C[0, 1] * C[1, 0]
    seg = math.hypot(*(p3 - p0))
    if det != 0:
        al = (X[0] * C[1, 1] - X[1] * C[0, 1]) / det
        ar = (C[0, 0] * X[1] - C[1, 0] * X[0]) / det
    else:
        al = ar = 0.0
    eps = 1e-6 * seg
    if al < eps or ar < eps:
        al = ar = seg / 3
    return np.array([p0, p0 + al * t1, p3 + ar * t2, p3])


def _max_error(pts, ctrl, u) -> tuple[float, int]:
    d = np.hypot(*(_bez(ctrl, u) - pts).T)
    inner = d[1:-1]
    if not len(inner):
        return 0.0, len(pts) // 2
    k = int(np.argmax(inner)) + 1
    return float(d[k]), k


def _reparam(pts, ctrl, u) -> np.ndarray:
    q = _bez(ctrl, u) - pts
    q1 = _bez_d1(ctrl, u)
    q2 = _bez_d2(ctrl, u)
    num = np.sum(q * q1, axis=1)
    den = np.sum(q1 * q1, axis=1) + np.sum(q * q2, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        nu = np.where(den != 0, u - num / den, u)
    nu = np.clip(nu, 0.0, 1.0)
    nu[0], nu[-1] = 0.0, 1.0
    return nu if np.all(np.diff(nu) >= 0) else u


def _fit_run(pts, t1, t2, err, out: list) -> None:
    if len(pts) == 2:
        seg = math.hypot(*(pts[1] - pts[0])) / 3
        out.append(np.array([pts[0], pts[0] + t1 * seg, pts[1] + t2 * seg, pts[1]]))
        return
    u = _chord_params(pts)
    ctrl = _generate(pts, u, t1, t2)
    e, split = _max_error(pts, ctrl, u)
    if e <= err:
        out.append(ctrl)
        return
    if e <= 4 * err:
        for _ in range(20):
            u2 = _reparam(pts, ctrl, u)
            ctrl = _generate(pts, u2, t1, t2)
            e, split = _max_error(pts, ctrl, u2)
            if e <= err:
                out.append(ctrl)
                return
            u = u2
    tc = _unit(_reach(pts, split, -1, TANGENT_REACH) - _reach(pts, split, 1, TANGENT_REACH))
    if not tc.any():
        tc = _unit(pts[split - 1] - pts[split])
    _fit_run(pts[: split + 1], t1, tc, err, out)
    _fit_run(pts[split:], -tc, t2, err, out)


def _straight(a, b) -> np.ndarray:
    return np.array([a, a + (b - a) / 3, a + 2 * (b - a) / 3, b])


def _densify(pts: np.ndarray, spacing: float) -> np.ndarray:
    seg = np.hypot(*np.diff(pts, axis=0).T)
    k = np.maximum(1, np.ceil(seg / spacing).astype(int))
    if np.all(k == 1):
        return pts
    out = [pts[:1]]
    for i, m in enumerate(k):
        t = (np.arange(1, m + 1) / m)[:, None]
        out.append(pts[i] + t * (pts[i + 1] - pts[i]))
    return np.vstack(out)


def find_corners(pts: np.ndarray, closed: bool, corner_angle: float, reach: float = 0.0) -> list[int]:
    """Indices whose turn angle exceeds ``corner_angle`` degrees.

    The incoming and outgoing directions are taken to the nearest vertex at
    least ``reach`` away, so a sharp turn spread over a few short edges
    still registers.
    """
    n = len(pts)
    idx = range(n) if closed else range(1, n - 1)
    lim = math.radians(corner_angle)

    def toward(i, step):
        j = i
        for _ in range(n - 1):
            j += step
            if not closed and not 0 <= j < n:
                return pts[j - step]
            q = pts[j % n]
            if math.hypot(*(q - pts[i])) >= reach:
                return q
        return q

    out = []
    for i in idx:
        a = pts[i] - toward(i, -1)
        b = toward(i, 1) - pts[i]
        ang = abs(math.atan2(a[0] * b[1] - a[1] * b[0], a[0] * b[0] + a[1] * b[1]))
        if ang > lim:
            out.append(i)
    return out


def _reach(pts: np.ndarray, i: int, step: int, dist: float) -> np.ndarray:
    """First point from ``i`` (moving by ``step``) at least ``dist`` away, or the end."""
    j = i
    while 0 <= j + step < len(pts):
        j += step
        if math.hypot(*(pts[j] - pts[i])) >= dist:
            break
    return pts[j]


def _fit_span(run: np.ndarray, err: float, out: list) -> None:
    if len(run) == 2:
        out.append(_straight(run[0], run[1]))
        return
    # end tangents from a short chord: single-step differences on pixel
    # boundaries point along the staircase, not the shape
    t1 = _unit(_reach(run, 0, 1, TANGENT_REACH) - run[0])
    t2 = _unit(_reach(run, len(run) - 1, -1, TANGENT_REACH) - run[-1])
    _fit_run(_densify(run, max(err, 0.5)), t1, t2, err, out)


def fit_cubics(points, cfg: TraceConfig = TraceConfig(), closed: bool = False, corners=None) -> list[np.ndarray]:
    """Control polygons (4x2 arrays) of the piecewise cubic fit.

    ``corners`` overrides corner detection with explicit vertex indices.
    Long polyline edges are subdivided before fitting so the error bound
    also holds between the given points.
    """
    pts = np.asarray(points, dtype=np.float64)
    remap = np.arange(len(pts))
    if len(pts) > 1:
        keep = np.ones(len(pts), bool)
        keep[1:] = np.any(np.diff(pts, axis=0) != 0, axis=1)
        if closed and len(pts) > 2 and np.array_equal(pts[0], pts[-1]):
            keep[-1] = False
        remap = np.cumsum(keep) - 1
        pts = pts[keep]
    if len(pts) < 2:
        raise TooFewPoints(f"need at least 2 distinct points, got {len(pts)}")
    if corners is None:
        corners = find_corners(pts, closed, cfg.corner_angle)
    else:
        corners = sorted({int(remap[c]) for c in corners})
        if not closed:
            corners = [c for c in corners if 0 < c < len(pts) - 1]
    err = cfg.max_fit_error
    out: list[np.ndarray] = []
    if not closed:
        bounds = [0] + list(corners) + [len(pts) - 1]
        for a, b in zip(bounds, bounds[1:]):
            _fit_span(pts[a : b + 1], err, out)
        return out
    if len(pts) == 2:
        return [_straight(pts[0], pts[1]), _straight(pts[1], pts[0])]
    n = len(pts)
    if not corners:
        ring = _densify(np.vstack([pts, pts[:1]]), max(err, 0.5))
        wrapped = np.vstack([ring[-40:-1], ring[:40]])
        t = _unit(_reach(wrapped, 39, 1, TANGENT_REACH) - _reach(wrapped, 39, -1, TANGENT_REACH))
        _fit_run(ring, t, -t, err, out)
        return out
    # rotate so the ring starts at a corner
    s = corners[0]
    ring = pts[[(s + i) % n for i in range(n)] + [s]]
    marks = sorted((c - s) % n for c in corners) + [n]
    for a, b in zip(marks, marks[1:]):
        _fit_span(ring[a : b + 1], err, out)
    return out


def cubics_to_subpath(cubics: list[np.ndarray], closed: bool) -> Subpath:
    segs = tuple(CubicTo(*c[1:].ravel().tolist()) for c in cubics)
    return Subpath(tuple(cubics[0][0].tolist()), segs, closed)


def fit_beziers(points, cfg: TraceConfig = TraceConfig(), closed: bool = False) -> PathData:
    """Fit a polyline (or closed ring) with cubic Béziers within ``max_fit_error``."""
    cubics = fit_cubics(points, cfg, closed)
    return PathData((cubics_to_subpath(cubics, closed),))


# -- whole layer -----------------------------------------------------------


def _hole_seed(ring: np.ndarray) -> tuple[int, int]:
    """(row, col) of the background pixel right of the ring's first edge."""
    x, y = int(ring[0][0]), int(ring[0][1])
    dx = int(np.sign(ring[1][0] - ring[0][0]))
    dy = int(np.sign(ring[1][1] - ring[0][1]))
    if (dx, dy) == (1, 0):
        return y - 1, x
    if (dx, dy) == (0, 1):
        return y, x
    if (dx, dy) == (-1, 0):
        return y, x - 1
    return y - 1, x - 1


def _relax(pts: np.ndarray, fixed, passes: int) -> np.ndarray:
    """Binomial smoothing of a closed point loop, pinning ``fixed`` indices."""
    pts = pts.copy()
    fixed = np.asarray(list(fixed), dtype=np.intp)
    for _ in range(passes):
        pinned = pts[fixed]
        pts = 0.25 * np.roll(pts, 1, axis=0) + 0.5 * pts + 0.25 * np.roll(pts, -1, axis=0)
        pts[fixed] = pinned
    return pts


def _ring_path(ring: np.ndarray, cfg: TraceConfig, rgb: np.ndarray | None = None, color=None) -> Subpath:
    # corners come from the simplified ring; the fit itself runs on the
    # dense boundary so curves hug the pixels rather than the DP chords
    if len(ring) < 4:
        pts = np.asarray(ring, dtype=np.float64)
    else:
        offs = edge_offsets(ring, rgb, color) if rgb is not None else None
        pts = boundary_points(ring, offs)
    if len(pts) < 3:
        return cubics_to_subpath(fit_cubics(pts, cfg, closed=True), True)
    keep = simplify_indices(pts, cfg.simplify_epsilon)
    reach = 4 * max(cfg.simplify_epsilon, 0.5)
    corners = [int(keep[i]) for i in find_corners(pts[keep], True, cfg.corner_angle, reach)]
    pts = _relax(pts, corners, SMOOTH_PASSES)
    return cubics_to_subpath(fit_cubics(pts, cfg, closed=True, corners=corners), True)


def _rgb(img: RasterImage) -> np.ndarray:
    d = img.data[:, :, :3] if img.channels == 4 else np.repeat(img.data, 3, axis=2)
    return d.astype(np.float64)


def trace_layer(layer: RasterImage, cfg: TraceConfig = TraceConfig(), hint: RasterImage | None = None) -> VectorLayer:
    """Vectorize a (mostly flat-colored) RGBA layer.

    Paths come largest first. A hole is cut (even-odd) only when it encloses
    transparent pixels; holes fully covered by smaller regions are left
    filled and the smaller regions are stacked on top.

    ``hint`` is an optional same-sized image showing what lies under the
    transparent part of ``layer``; edge pixels are compared against it to
    place outlines with sub-pixel accuracy.
    """
    palette, labels = quantize_colors(layer, cfg)
    if not palette:
        return VectorLayer([])
    labels = absorb_speckles(layer, palette, labels, cfg.speckle_area)
    comps = extract_components(labels, cfg)
    rgb = _rgb(layer)
    if hint is not None and layer.channels == 4:
        if hint.shape != layer.shape:
            raise DimensionMismatch(f"hint {hint.shape} vs layer {layer.shape}")
        rgb = np.where((layer.data[:, :, 3] >= OPAQUE_ALPHA)[:, :, None], rgb, _rgb(hint))
    covered = np.zeros(labels.shape, bool)
    for c in comps:
        covered[c.y0 : c.y0 + c.mask.shape[0], c.x0 : c.x0 + c.mask.shape[1]] |= c.mask

    items = []
    for ci, comp in enumerate(comps):
        rings = trace_contours(comp)
        outer, holes = rings[0], rings[1:]
        kept_holes = []
        if holes:
            filled = ndimage.binary_fill_holes(comp.mask)
            hole_px = filled & ~comp.mask
            hl, _ = ndimage.label(hole_px, structure=_SQUARE)
            h, w = comp.mask.shape
            sub_cov = covered[comp.y0 : comp.y0 + h, comp.x0 : comp.x0 + w]
            open_holes = set(np.unique(hl[hole_px & ~sub_cov]).tolist())
            for ring in holes:
                r, c = _hole_seed(ring)
                lab = hl[r - comp.y0, c - comp.x0]
                if lab in open_holes:
                    kept_holes.append(ring)
        col = palette[comp.color_index]
        subpaths = tuple(_ring_path(r, cfg, rgb, col.rgb) for r in [outer] + kept_holes)
        area = abs(signed_area(outer))
        items.append((-area, ci, PathData(subpaths), palette[comp.color_index]))
    items.sort(key=lambda t: (t[0], t[1]))
    return VectorLayer([(d, col) for _, _, d, col in items])
