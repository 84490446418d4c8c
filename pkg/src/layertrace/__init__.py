"""Layered SVG decomposition into serpentine frame grids, and the way back."""

__version__ = "0.1.0"

from .assembler import LayeredResult, PipelineConfig, dedupe_frames, vectorize_grid, vectorize_sequence
from .decomposer import FrameSequence, bucket_layers, build_sequence, classify_line_elements
from .grid import GRID_2X2, GRID_3X3, GridLayout, compose_grid, infer_layout, segment_grid, serpentine_index
from .imgproc import DiffConfig, extract_line_layer, frame_diff, mask_to_rgba, otsu_threshold, to_grayscale
from .metrics import MetricsReport, count_paths, evaluate, mse, ssim
from .raster import RasterImage, render, render_cumulative
from .svg_doc import Group, Path, PathData, Rgba, SvgDocument, enumerate_layers, flatten_transforms, serialize_svg
from .svg_parse import load_svg, parse_svg
from .tracer import TraceConfig, VectorLayer, fit_beziers, simplify_polygon, trace_layer

__all__ = [
    "DiffConfig", "FrameSequence", "GRID_2X2", "GRID_3X3", "GridLayout", "Group", "LayeredResult",
    "MetricsReport", "Path", "PathData", "PipelineConfig", "RasterImage", "Rgba", "SvgDocument",
    "TraceConfig", "VectorLayer", "bucket_layers", "build_sequence", "classify_line_elements",
    "compose_grid", "count_paths", "dedupe_frames", "enumerate_layers", "evaluate", "extract_line_layer",
    "fit_beziers", "flatten_transforms", "frame_diff", "infer_layout", "load_svg", "mask_to_rgba", "mse",
    "otsu_threshold", "parse_svg", "render", "render_cumulative", "segment_grid", "serialize_svg",
    "serpentine_index", "simplify_polygon", "ssim", "to_grayscale", "trace_layer", "vectorize_grid",
    "vectorize_sequence",
]
