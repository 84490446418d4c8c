import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from layertrace.errors import DegeneratePolygon, TooFewPoints
from layertrace.raster import RasterImage, render
from layertrace.svg_doc import SvgDocument
from layertrace.tracer import (
    Component,
    TraceConfig,
    extract_components,
    find_corners,
    fit_beziers,
    fit_cubics,
    quantize_colors,
    signed_area,
    simplify_polygon,
    trace_contours,
    trace_layer,
)


def layer(h, w, rects):
    """Transparent canvas with opaque axis-aligned (y0, x0, y1, x1, rgb) rects."""
    a = np.zeros((h, w, 4), np.uint8)
    for y0, x0, y1, x1, rgb in rects:
        a[y0:y1, x0:x1] = (*rgb, 255)
    return RasterImage(a)


def shoelace(poly):
    # written out independently of the module's helper
    s = 0.0
    for (x0, y0), (x1, y1) in zip(poly, list(poly[1:]) + [poly[0]]):
        s += x0 * y1 - x1 * y0
    return s / 2


def seg_dist(p, a, b):
    ab = b - a
    t = 0.0 if not ab.any() else min(1.0, max(0.0, float(np.dot(p - a, ab) / np.dot(ab, ab))))
    return float(np.hypot(*(p - a - t * ab)))


def sample(cubics, n=400):
    t = np.linspace(0, 1, n)[:, None]
    return np.vstack([(1 - t) ** 3 * c[0] + 3 * (1 - t) ** 2 * t * c[1] + 3 * (1 - t) * t * t * c[2] + t**3 * c[3] for c in cubics])


def render_back_mse(src: RasterImage, vl) -> float:
    """Normalized RGB MSE over pixels opaque in either image, skipping a 1 px edge band."""
    h, w = src.shape
    out = render(SvgDocument(w, h, tuple(vl.to_nodes())), w, h)
    a, b = src.data.astype(float) / 255, out.data.astype(float) / 255
    sa, sb = a[:, :, 3] >= 0.5, b[:, :, 3] >= 0.5
    from scipy import ndimage

    band = ndimage.binary_dilation(sa, np.ones((3, 3))) & ~ndimage.binary_erosion(sa, np.ones((3, 3)))
    sel = (sa | sb) & ~band
    if not sel.any():
        return 0.0
    # premultiplied colors so a missing pixel counts as a full error
    pa, pb = a[:, :, :3] * a[:, :, 3:], b[:, :, :3] * b[:, :, 3:]
    return float(((pa - pb)[sel] ** 2).mean())


# -- quantization ------------------------------------------------------------


def test_two_far_colors():
    pal, labels = quantize_colors(layer(10, 10, [(0, 0, 10, 5, (255, 0, 0)), (0, 5, 10, 10, (0, 0, 255))]))
    assert len(pal) == 2 and labels.min() == 0


def test_close_colors_merge():
    pal, _ = quantize_colors(layer(10, 10, [(0, 0, 10, 5, (100, 0, 0)), (0, 5, 10, 10, (104, 0, 0))]))
    assert len(pal) == 1 and pal[0].r == 102


def test_transparent_palette_empty():
    pal, labels = quantize_colors(RasterImage(np.zeros((5, 5, 4), np.uint8)))
    assert pal == [] and np.all(labels == -1)


def test_config_validation():
    with pytest.raises(ValueError):
        TraceConfig(color_precision=0)
    with pytest.raises(ValueError):
        TraceConfig(max_fit_error=-1)


# -- components ----------------------------------------------------------------


def _labels(mask):
    return np.where(mask, 0, -1).astype(np.int32)


def test_two_disjoint_squares():
    m = np.zeros((20, 20), bool)
    m[0:5, 0:5] = m[10:15, 10:15] = True
    assert len(extract_components(_labels(m))) == 2


def test_diagonal_squares_are_separate():
    m = np.zeros((10, 10), bool)
    m[0:5, 0:5] = m[5:10, 5:10] = True
    assert len(extract_components(_labels(m))) == 2


def test_small_dot_dropped():
    m = np.zeros((10, 10), bool)
    m[2:5, 2:5] = True
    assert extract_components(_labels(m)) == []


# -- contours ------------------------------------------------------------------


def test_square_contour_area():
    m = np.zeros((12, 12), bool)
    m[1:11, 1:11] = True
    rings = trace_contours(Component.from_full_mask(0, m))
    assert len(rings) == 1 and shoelace(rings[0].tolist()) == 100


def test_square_with_hole():
    m = np.zeros((12, 12), bool)
    m[1:11, 1:11] = True
    m[4:8, 4:8] = False
    rings = trace_contours(Component.from_full_mask(0, m))
    assert [shoelace(r.tolist()) for r in rings] == [100, -16]


def test_single_pixel_unit_square():
    m = np.zeros((3, 3), bool)
    m[1, 1] = True
    (ring,) = trace_contours(Component.from_full_mask(0, m))
    assert sorted(map(tuple, ring.tolist())) == [(1, 1), (1, 2), (2, 1), (2, 2)]


@given(st.integers(0, 2**32 - 1))
def test_contour_areas_add_up(seed):
    rng = np.random.default_rng(seed)
    m = rng.random((14, 14)) < 0.6
    from scipy import ndimage

    lab, n = ndimage.label(m, structure=ndimage.generate_binary_structure(2, 1))
    for i in range(1, n + 1):
        comp = Component.from_full_mask(0, lab == i)
        rings = trace_contours(comp)
        assert sum(shoelace(r.tolist()) for r in rings) == comp.area
        assert signed_area(rings[0]) > 0 and all(signed_area(r) < 0 for r in rings[1:])


# -- simplification ----------------------------------------------------------


def test_staircase_square_to_four_vertices():
    edge = [(x, 0) for x in range(10)] + [(10, y) for y in range(10)]
    edge += [(10 - x, 10) for x in range(10)] + [(0, 10 - y) for y in range(10)]
    out = simplify_polygon(edge, 1.0)
    assert sorted(map(tuple, out.tolist())) == [(0, 0), (0, 10), (10, 0), (10, 10)]


def test_triangle_unchanged():
    tri = np.array([[0, 0], [10, 0], [0, 10]], float)
    assert np.array_equal(simplify_polygon(tri, 1.0), tri)


def test_degenerate_polygon():
    with pytest.raises(DegeneratePolygon):
        simplify_polygon([(0, 0), (1, 1)], 1.0)


@given(st.lists(st.floats(5, 50), min_size=3, max_size=40), st.floats(0.1, 5))
def test_simplified_ring_stays_within_epsilon(radii, eps):
    # star-shaped polygons are simple by construction
    ang = np.linspace(0, 2 * math.pi, len(radii), endpoint=False)
    poly = np.c_[np.cos(ang) * radii, np.sin(ang) * radii]
    out = simplify_polygon(poly, eps)
    segs = list(zip(out, np.roll(out, -1, axis=0)))
    for p in poly:
        assert min(seg_dist(p, a, b) for a, b in segs) <= eps + 1e-9


# -- Bézier fitting ------------------------------------------------------------


def test_collinear_fit_is_straight():
    pts = np.c_[np.linspace(0, 30, 16), np.linspace(5, 20, 16)]
    cubics = fit_cubics(pts)
    assert len(cubics) == 1
    d = np.array([30, 15]) / math.hypot(30, 15)
    for q in cubics[0]:
        v = q - pts[0]
        assert abs(v[0] * d[1] - v[1] * d[0]) <= 1e-6


@pytest.mark.parametrize("tol", [1.5, 0.3])
def test_quarter_circle(tol):
    th = np.linspace(0, math.pi / 2, 200)
    pts = 100 * np.c_[np.cos(th), np.sin(th)]
    cubics = fit_cubics(pts, TraceConfig(max_fit_error=tol))
    r = np.hypot(*sample(cubics).T)
    assert np.abs(r - 100).max() <= tol
    assert fit_beziers(pts, TraceConfig(max_fit_error=tol)).subpaths[0].segments


def test_square_ring_four_corners():
    side = np.linspace(0, 20, 21)[:-1]
    ring = np.vstack([np.c_[side, 0 * side], np.c_[20 + 0 * side, side], np.c_[20 - side, 20 + 0 * side], np.c_[0 * side, 20 - side]])
    assert len(find_corners(ring, True, 60)) == 4
    assert len(fit_cubics(ring, TraceConfig(), closed=True)) == 4


def test_too_few_points():
    with pytest.raises(TooFewPoints):
        fit_beziers([(1, 1), (1, 1)])


@settings(max_examples=60)
@given(st.lists(st.tuples(st.floats(0, 60), st.floats(0, 60)), min_size=2, max_size=25), st.sampled_from([0.3, 1.5]))
def test_fit_error_bound_pointwise(pts, tol):
    pts = np.array(pts)
    if len(np.unique(pts, axis=0)) < 2:
        return
    curve = sample(fit_cubics(pts, TraceConfig(max_fit_error=tol)), 2000)
    d = np.sqrt(((pts[:, None, :] - curve[None]) ** 2).sum(2)).min(1)
    # sample spacing adds a little slack to the true point-to-curve distance
    assert d.max() <= tol + 0.05


# -- whole layer ---------------------------------------------------------------


def test_transparent_layer_no_paths():
    assert len(trace_layer(RasterImage(np.zeros((20, 20, 4), np.uint8)))) == 0


def test_red_square_render_back():
    src = layer(140, 140, [(20, 20, 120, 120, (255, 0, 0))])
    vl = trace_layer(src)
    assert len(vl) == 1
    assert render_back_mse(src, vl) <= 1e-3


def test_disk_inside_square_ordering():
    a = np.zeros((120, 120, 4), np.uint8)
    a[10:110, 10:110] = (0, 0, 255, 255)
    yy, xx = np.mgrid[:120, :120]
    a[(yy - 60) ** 2 + (xx - 60) ** 2 <= 30**2] = (255, 0, 0, 255)
    vl = trace_layer(RasterImage(a))
    assert [c.rgb for _, c in vl.paths] == [(0, 0, 255), (255, 0, 0)]


def test_hole_kept_only_when_transparent():
    a = layer(60, 60, [(5, 5, 55, 55, (0, 0, 255))]).data.copy()
    a[20:40, 20:40] = 0
    ring = RasterImage(a)
    vl = trace_layer(ring)
    assert len(vl) == 1 and len(vl.paths[0][0].subpaths) == 2
    assert render_back_mse(ring, vl) <= 1e-3
    # a hole filled by another color is painted over instead of cut out
    a = a.copy()
    a[20:40, 20:40] = (255, 0, 0, 255)
    vl = trace_layer(RasterImage(a))
    assert [len(d.subpaths) for d, _ in vl.paths] == [1, 1]


def test_trace_deterministic():
    rng = np.random.default_rng(7)
    a = np.kron(rng.integers(0, 4, (8, 8)), np.ones((8, 8), int))
    pal = np.array([[0, 0, 0, 0], [255, 0, 0, 255], [0, 160, 0, 255], [20, 20, 200, 255]], np.uint8)
    src = RasterImage(pal[a])
    first, second = trace_layer(src), trace_layer(src)
    assert first.paths == second.paths


def random_rects(rng, k):
    """k rects, one per 32 px slot, with distinct far-apart colors."""
    slots = rng.choice(16, size=k, replace=False)
    rects = []
    for i, s in enumerate(slots):
        y, x = divmod(int(s), 4)
        h, w = rng.integers(3, 29, 2)
        oy, ox = rng.integers(1, 31 - h + 1), rng.integers(1, 31 - w + 1)
        rgb = tuple(int(v) for v in rng.choice([0, 128, 255], 3))
        rects.append((32 * y + oy, 32 * x + ox, 32 * y + oy + h, 32 * x + ox + w, rgb))
    return layer(128, 128, rects)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_rect_layers_path_economy_and_fidelity(seed, k):
    src = random_rects(np.random.default_rng(seed), k)
    vl = trace_layer(src, TraceConfig(speckle_area=1))
    assert len(vl) == k
    assert render_back_mse(src, vl) <= 1e-3


def test_isolated_hairline_survives():
    src = layer(40, 40, [(10, 5, 12, 35, (0, 0, 0))])
    assert len(trace_layer(src)) == 1
