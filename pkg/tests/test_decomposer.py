from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import CORPUS, svg
from layertrace.decomposer import bucket_layers, build_sequence, classify_line_elements, is_line_color, sequence_images
from layertrace.errors import ZeroLayers
from layertrace.imgproc import DiffConfig, frame_diff
from layertrace.metrics import mse
from layertrace.raster import render
from layertrace.svg_doc import WHITE, Group, LineTo, Path, PathData, Rgba, StrokeStyle, Subpath, SvgDocument, iter_paths
from layertrace.svg_parse import parse_svg


def _square(x, y, s, fill=None, stroke=None):
    sp = Subpath((x, y), (LineTo(x + s, y), LineTo(x + s, y + s), LineTo(x, y + s)), True)
    return Path(PathData((sp,)), fill, StrokeStyle(stroke, 3) if stroke else None)


def test_black_outline_and_red_fill_split():
    doc = parse_svg(svg('<rect width="10" height="10" fill="none" stroke="#000"/><rect width="5" height="5" fill="#FF0000"/>'))
    lines, rest = classify_line_elements(doc)
    assert len(list(iter_paths(lines.root))) == 1 and len(list(iter_paths(rest.root))) == 1


def test_no_black_elements():
    doc = parse_svg((CORPUS / "flat_folder.svg").read_text())
    lines, rest = classify_line_elements(doc)
    assert lines.root == () and rest == doc


def test_near_black_threshold():
    assert is_line_color(Rgba(32, 32, 32))
    assert is_line_color(Rgba(40, 40, 40, 200))
    assert not is_line_color(Rgba(41, 0, 0))
    assert not is_line_color(Rgba(0, 0, 0, 199))


def _oracle_buckets(n, f):
    # deal layers to frames one at a time; then sort so larger buckets come first
    counts = Counter(i % f for i in range(n))
    return sorted((counts.get(i, 0) for i in range(f)), reverse=True)


@pytest.mark.parametrize("n,f,expect", [(9, 9, [1] * 9), (12, 9, [2, 2, 2, 1, 1, 1, 1, 1, 1]), (3, 4, [1, 1, 1, 0])])
def test_bucket_examples(n, f, expect):
    assert bucket_layers(n, f) == expect


@given(st.integers(1, 200), st.sampled_from([4, 9]))
def test_bucket_matches_dealing_oracle(n, f):
    b = bucket_layers(n, f)
    assert len(b) == f and sum(b) == n
    assert b == _oracle_buckets(n, f)


def test_bucket_zero_layers():
    with pytest.raises(ZeroLayers):
        bucket_layers(0, 4)


def _layer_sets(seq):
    return [set(s) for s in seq.layer_sets]


def test_three_layers_four_frames():
    body = "".join(f'<g><rect x="{10 * i}" width="8" height="8" fill="#f00"/></g>' for i in range(3))
    seq = build_sequence(parse_svg(svg(body)), 4)
    assert _layer_sets(seq) == [{0}, {0, 1}, {0, 1, 2}, {0, 1, 2}]
    assert seq.frames[2] == seq.frames[3]


def _outline_icon():
    fills = tuple(Group((_square(10 + 20 * i, 10, 15, Rgba(200, 100 + 10 * i, 50)),), f"f{i}") for i in range(8))
    lines = Group(tuple(_square(10 + 20 * i, 10, 15, None, Rgba(0, 0, 0)) for i in range(8)), "lines")
    return SvgDocument(200, 40, fills + (lines,))


def test_outline_icon_isolation():
    doc = _outline_icon()
    seq = build_sequence(doc, 9, isolate_lines=True)
    assert seq.line_layer is not None
    assert [p.stroke is not None for p in iter_paths(seq.frames[0].root)] == [True] * 8
    assert _layer_sets(seq) == [set(range(k)) for k in range(9)]
    for k in range(1, 9):
        new = [p for p in iter_paths(seq.frames[k].root) if p.fill is not None]
        assert len(new) == k


def test_last_frame_renders_as_source():
    for name in ("outline_house.svg", "emoji_cat.svg"):
        doc = parse_svg((CORPUS / name).read_text())
        seq = build_sequence(doc, 9, isolate_lines=name.startswith("outline"))
        assert mse(render(seq.frames[-1], 512, 512, WHITE), render(doc, 512, 512, WHITE)) == 0


def test_bad_frame_count():
    with pytest.raises(ValueError):
        build_sequence(_outline_icon(), 5)


def test_empty_document():
    with pytest.raises(ZeroLayers):
        build_sequence(SvgDocument(10, 10), 4)


def test_only_lines():
    doc = SvgDocument(40, 40, (Group((_square(5, 5, 20, None, Rgba(0, 0, 0)),)),))
    seq = build_sequence(doc, 4, isolate_lines=True)
    assert all(f == seq.line_layer for f in seq.frames)


# -- properties over random layered documents --------------------------------

color = st.builds(Rgba, st.integers(0, 255), st.integers(0, 255), st.integers(0, 255), st.sampled_from([255, 220, 150]))
square = st.builds(
    lambda x, y, s, c, stroked: _square(x, y, s, None, c) if stroked else _square(x, y, s, c),
    st.integers(0, 80),
    st.integers(0, 80),
    st.integers(4, 40),
    color,
    st.booleans(),
)
layered = st.lists(st.lists(square, min_size=1, max_size=3), min_size=1, max_size=14).map(
    lambda groups: SvgDocument(128, 128, tuple(Group(tuple(g), f"g{i}") for i, g in enumerate(groups)))
)


def _ids(doc):
    return Counter(id(p) for p in iter_paths(doc.root))


@given(layered)
def test_classify_is_a_partition(doc):
    lines, rest = classify_line_elements(doc)
    a, b = _ids(lines), _ids(rest)
    assert not set(a) & set(b)
    assert a + b == _ids(doc)
    # relative order preserved on each side
    order = [id(p) for p in iter_paths(doc.root)]
    for side in (lines, rest):
        idx = [order.index(id(p)) for p in iter_paths(side.root)]
        assert idx == sorted(idx)


@given(layered, st.sampled_from([4, 9]), st.booleans())
def test_cumulative_and_conserving(doc, frames, isolate):
    seq = build_sequence(doc, frames, isolate)
    assert len(seq.frames) == frames
    for a, b in zip(seq.frames, seq.frames[1:]):
        assert set(_ids(a)) <= set(_ids(b))
    assert _ids(seq.frames[-1]) == _ids(doc)


def test_adjacent_diffs_stay_near_bucket_geometry():
    doc = parse_svg((CORPUS / "flat_landscape.svg").read_text())
    seq = build_sequence(doc, 9)
    imgs = sequence_images(seq)
    s = 352 / doc.width
    for k in range(1, 9):
        new = set(_ids(seq.frames[k])) - set(_ids(seq.frames[k - 1]))
        mask = frame_diff(imgs[k - 1], imgs[k], DiffConfig())
        if not new:
            assert not mask.any()
            continue
        pts = np.array([q for p in iter_paths(seq.frames[k].root) if id(p) in new for q in p.data.points()]) * s
        (x0, y0), (x1, y1) = np.floor(pts.min(0) - 2).astype(int), np.ceil(pts.max(0) + 2).astype(int)
        box = np.zeros_like(mask)
        box[max(y0, 0) : y1, max(x0, 0) : x1] = True
        assert not (mask & ~box).any()
