import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import ndimage

from conftest import CORPUS, solid, synthetic_frames
from layertrace.assembler import PipelineConfig, content_mask, dedupe_frames, is_outline_style, vectorize_grid, vectorize_sequence
from layertrace.decomposer import build_sequence, is_line_color, sequence_images
from layertrace.errors import EmptyGrid, EmptyInput, UnknownResolution
from layertrace.grid import GRID_2X2, GRID_3X3, compose_grid
from layertrace.imgproc import frame_diff, mask_to_rgba
from layertrace.metrics import count_paths, mse
from layertrace.raster import RasterImage, render
from layertrace.svg_doc import WHITE, iter_paths, serialize_svg
from layertrace.svg_parse import parse_svg
from layertrace.tracer import trace_layer


@pytest.fixture(scope="module")
def frames():
    return synthetic_frames()


@pytest.fixture(scope="module")
def result(frames):
    return vectorize_grid(compose_grid(frames, GRID_2X2), "auto")


# -- dedup ---------------------------------------------------------------------


def test_identical_cells_keep_first():
    assert dedupe_frames([solid(8, 8)] * 9) == [0]


def test_distinct_cells_all_kept():
    cells = [solid(8, 8, (v, v, v, 255)) for v in range(0, 250, 30)]
    assert dedupe_frames(cells) == list(range(len(cells)))


def test_aabb_pattern():
    a, b = solid(8, 8), solid(8, 8, (0, 0, 0, 255))
    assert dedupe_frames([a, a, b, b]) == [0, 2]


def test_dedup_empty():
    with pytest.raises(EmptyInput):
        dedupe_frames([])


def test_dedup_compares_to_last_kept():
    # slow drift: each step is tiny but the total is not
    cells = [solid(8, 8, (255 - v, 255, 255, 255)) for v in range(0, 10)]
    thr = mse(cells[0], cells[3]) * 0.99
    kept = dedupe_frames(cells, thr)
    assert len(kept) > 1 and all(b - a >= 3 for a, b in zip(kept, kept[1:]))


@given(st.integers(0, 2**32 - 1), st.floats(0, 0.05), st.floats(0, 0.05))
def test_dedup_monotone(seed, t1, t2):
    rng = np.random.default_rng(seed)
    base = rng.integers(0, 256, (6, 6, 4), dtype=np.uint8)
    cells = []
    for _ in range(9):
        if rng.random() < 0.5:
            base = base.copy()
            base[rng.integers(0, 6), :] = rng.integers(0, 256, (6, 4))
        cells.append(RasterImage(base))
    lo, hi = sorted((t1, t2))
    assert len(dedupe_frames(cells, hi)) <= len(dedupe_frames(cells, lo))


def test_config_validation():
    for bad in (dict(dedup_mse=-1), dict(line_mode="maybe"), dict(line_source="middle"), dict(workers=0)):
        with pytest.raises(ValueError):
            PipelineConfig(**bad)


# -- end to end ------------------------------------------------------------------


def test_identical_cells_single_layer(frames):
    res = vectorize_grid(compose_grid([frames[2]] * 4, GRID_2X2))
    assert res.kept_frames == [0] and res.layer_count == 1
    assert mse(render(res.svg, 512, 512, WHITE), frames[2]) <= 1e-3


def test_synthetic_four_layers(result, frames):
    assert result.kept_frames == [0, 1, 2, 3]
    assert [g.id for g in result.svg.root] == ["layer-0", "layer-1", "layer-2", "layer-3"]
    assert not result.has_line_layer
    assert count_paths(result.svg) >= 4
    assert result.report.mse <= 5e-4


def test_layer_locality(result, frames):
    k = PipelineConfig().diff.morph_kernel
    for step in range(1, 4):
        diff = frame_diff(frames[step - 1], frames[step])
        grown = ndimage.binary_dilation(diff, np.ones((3, 3), bool), iterations=2 * k)
        only = result.svg.with_root([result.svg.root[step]])
        drawn = render(only, 512, 512).data[:, :, 3] > 0
        assert drawn.any() and not (drawn & ~grown).any()


def test_editability(result, frames):
    text = serialize_svg(result.svg)
    doc = parse_svg(text)
    for top in range(3, 0, -1):
        doc = doc.with_root(list(doc.root[:top]))
        assert mse(render(doc, 512, 512, WHITE), frames[top - 1]) <= 1e-3


def test_sequence_matches_grid(frames, result):
    seq = vectorize_sequence(frames)
    assert seq.svg == result.svg and seq.kept_frames == result.kept_frames


def test_workers_do_not_change_output(frames, result):
    assert vectorize_sequence(frames, PipelineConfig(workers=3)).svg == result.svg


def test_single_frame_equals_trace_layer():
    a = np.zeros((64, 64, 4), np.uint8)
    a[8:40, 8:40] = (200, 30, 30, 255)
    a[30:60, 30:60] = (30, 30, 200, 255)
    frame = RasterImage(a)
    res = vectorize_sequence([frame])
    assert res.layer_count == 1
    assert list(res.svg.root[0].children) == trace_layer(frame).to_nodes()


def test_single_opaque_frame_skips_white_background(frames):
    res = vectorize_sequence([frames[1]])
    expect = trace_layer(mask_to_rgba(frames[1], content_mask(frames[1])), hint=frames[1]).to_nodes()
    assert list(res.svg.root[0].children) == expect


def test_empty_sequence():
    with pytest.raises(EmptyInput):
        vectorize_sequence([])


def test_blank_grid():
    with pytest.raises(EmptyGrid):
        vectorize_grid(solid(1024, 1024), "auto")


def test_bad_grid_size():
    with pytest.raises(UnknownResolution):
        vectorize_grid(solid(800, 800), "auto")


def test_report_stages(result):
    assert set(result.report.elapsed) == {"segment", "trace", "assemble"}
    assert result.report.path_count == count_paths(result.svg)


# -- line work -----------------------------------------------------------------


@pytest.fixture(scope="module")
def outline_result():
    doc = parse_svg((CORPUS / "outline_house.svg").read_text())
    cells = sequence_images(build_sequence(doc, 9, isolate_lines=True), GRID_3X3)
    return cells, vectorize_grid(compose_grid(cells, GRID_3X3), "3x3")


def test_outline_detected(outline_result):
    cells, res = outline_result
    assert is_outline_style(cells[0]) and not is_outline_style(cells[-1])
    assert res.has_line_layer


def test_line_layer_is_top_and_dark(outline_result):
    _, res = outline_result
    top = list(iter_paths([res.svg.root[-1]]))
    assert top and all(is_line_color(p.fill) for p in top)
    assert res.svg.root[-1].id == f"layer-{res.layer_count - 1}"


def test_outline_fidelity_and_editability(outline_result):
    cells, res = outline_result
    assert res.report.mse <= 2e-3
    # dropping the top fill layer (just under the lines) gives the previous kept frame
    k = res.kept_frames
    root = list(res.svg.root)
    edited = res.svg.with_root(root[: len(k) - 1] + root[-1:])
    assert mse(render(edited, 352, 352, WHITE), cells[k[-2]]) <= 1e-3


def test_line_mode_off(outline_result):
    cells, _ = outline_result
    res = vectorize_sequence(cells, PipelineConfig(line_mode="off"))
    assert not res.has_line_layer and res.layer_count == len(res.kept_frames)


@pytest.mark.parametrize("src", ["first", "last"])
def test_line_source_switch(src):
    a = np.full((64, 64, 4), 255, np.uint8)
    a[10:12, 5:60] = (0, 0, 0, 255)
    b = a.copy()
    b[20:40, 20:40] = (200, 40, 40, 255)
    res = vectorize_sequence([RasterImage(a), RasterImage(b)], PipelineConfig(line_source=src))
    assert res.has_line_layer and res.layer_count == 3
