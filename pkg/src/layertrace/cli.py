"""``layertrace`` command line.

Exit codes: 0 ok, 2 bad input, 3 file I/O, 4 inference failure, 64 usage.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import replace
from pathlib import Path

from PIL import Image, UnidentifiedImageError

from . import __version__
from .assembler import LINE_MODES, LINE_SOURCES, PipelineConfig, vectorize_grid
from .client import InferenceClient, InferenceRequest, png_size
from .config import load_config
from .decomposer import build_sequence
from .errors import LayertraceError, StorageError
from .grid import GridLayout, compose_grid, infer_layout, segment_grid
from .manifest import STYLES, Manifest, ManifestEntry
from .metrics import evaluate
from .raster import RasterImage, render
from .svg_doc import WHITE, serialize_svg
from .svg_parse import load_svg, parse_svg

GRID_DEFAULT = GridLayout(3, 3, 352)
EXIT_OK, EXIT_INPUT, EXIT_IO, EXIT_INFERENCE, EXIT_USAGE = 0, 2, 3, 4, 64
_CATEGORY_EXIT = {"input": EXIT_INPUT, "io": EXIT_IO, "inference": EXIT_INFERENCE}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _err(msg: str) -> None:
    print(f"layertrace: {msg}", file=sys.stderr)


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, LayertraceError):
        return _CATEGORY_EXIT.get(exc.category, EXIT_INPUT)
    if isinstance(exc, UnidentifiedImageError):
        return EXIT_INPUT
    if isinstance(exc, OSError):
        return EXIT_IO
    if isinstance(exc, ValueError):
        return EXIT_INPUT
    raise exc


# -- helpers ---------------------------------------------------------------


def _load_png(path) -> RasterImage:
    return RasterImage.load_png(path)


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise StorageError(f"cannot write {path}: {e}") from e


def _save_png(img: RasterImage, path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        img.save_png(path)
    except OSError as e:
        raise StorageError(f"cannot write {path}: {e}") from e


def _load_svg_warn(path):
    doc = load_svg(path)
    for w in doc.warnings:
        _err(f"warning: {path}: {w}")
    return doc


def _pipeline_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    trace, top = {}, {}
    if args.max_fit_error is not None:
        trace["max_fit_error"] = args.max_fit_error
    if args.dedup_mse is not None:
        top["dedup_mse"] = args.dedup_mse
    if args.line_mode is not None:
        top["line_mode"] = args.line_mode
    if args.line_source is not None:
        top["line_source"] = args.line_source
    if args.workers is not None:
        top["workers"] = args.workers
    try:
        if trace:
            cfg = replace(cfg, trace=replace(cfg.trace, **trace))
        return replace(cfg, **top)
    except ValueError as e:
        raise LayertraceError(str(e)) from e


def _layout_arg(text: str):
    if text == "auto":
        return "auto"
    return GridLayout.parse(text)


def _write_result(result, out_svg: Path, debug_layers: bool) -> None:
    _write_text(out_svg, serialize_svg(result.svg))
    _write_text(out_svg.parent / "result.json", result.report.to_json() + "\n")
    if debug_layers:
        for k, img in enumerate(result.per_layer_pngs):
            _save_png(img, out_svg.parent / f"layer-{k}.png")


def _pool(fn, items, jobs: int):
    """Run ``fn`` over items, yielding (item, outcome) as each finishes."""
    if jobs <= 1 or len(items) <= 1:
        for it in items:
            yield it, _guard(fn, it)
        return
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        futs = {ex.submit(_guard, fn, it): it for it in items}
        for f in as_completed(futs):
            yield futs[f], f.result()


def _guard(fn, item):
    try:
        return ("ok", fn(item))
    except Exception as e:  # reported per entry; the batch keeps going
        try:
            code = exit_code(e)
        except Exception:
            code = 1
        return ("error", (code, f"{type(e).__name__}: {e}"))


def _jobs(args) -> int:
    return args.jobs if args.jobs else (os.cpu_count() or 1)


# -- decompose -------------------------------------------------------------


def cmd_decompose(args) -> int:
    doc = _load_svg_warn(args.svg)
    seq = build_sequence(doc, args.frames, args.isolate_lines, args.id or Path(args.svg).stem)
    layout = GridLayout.for_frames(args.frames)
    frames = seq.render(layout.cell)
    out = Path(args.out)
    for i, f in enumerate(frames):
        _save_png(f, out / f"frame-{i}.png")
    grid_path = out / "grid.png"
    _save_png(compose_grid(frames, layout), grid_path)
    style = args.style or ("outline" if args.isolate_lines else "flat")
    entry = ManifestEntry(seq.source_id, args.prompt, str(args.svg), str(grid_path), args.frames, style)
    mpath = Path(args.manifest) if args.manifest else out / "manifest.json"
    Manifest.load_or_empty(mpath).upsert(entry).save(mpath)
    print(f"{seq.source_id}: {args.frames} frames -> {grid_path}")
    return EXIT_OK


# -- vectorize -------------------------------------------------------------


def _vectorize_entry(job):
    entry, out_dir, cfg, debug = job
    grid = _load_png(entry.grid_png)
    result = vectorize_grid(grid, "auto", cfg)
    out_svg = Path(out_dir) / entry.id / "out.svg"
    _write_result(result, out_svg, debug)
    return f"{len(result.svg.root)} layers, {result.report.path_count} paths, mse {result.report.mse:.2e}"


def cmd_vectorize(args) -> int:
    cfg = _pipeline_config(args)
    if args.manifest:
        if args.grid:
            raise LayertraceError("give either a grid PNG or --manifest, not both")
        entries = [e for e in Manifest.load(args.manifest).accepted() if e.grid_png]
        jobs = [(e, args.out_dir, cfg, args.debug_layers) for e in entries]
        return _report_batch(_pool(_vectorize_entry, jobs, _jobs(args)), lambda j: j[0].id)
    if not args.grid:
        raise LayertraceError("a grid PNG or --manifest is required")
    grid = _load_png(args.grid)
    result = vectorize_grid(grid, _layout_arg(args.layout), cfg)
    _write_result(result, Path(args.out), args.debug_layers)
    print(f"{len(result.svg.root)} layers (frames {result.kept_frames}), {result.report.path_count} paths -> {args.out}")
    return EXIT_OK


def _report_batch(outcomes, name) -> int:
    code = EXIT_OK
    for item, (status, payload) in outcomes:
        if status == "ok":
            print(f"[ok] {name(item)}: {payload}", flush=True)
        else:
            c, msg = payload
            _err(f"[fail] {name(item)}: {msg}")
            code = code or c
    return code


# -- eval ------------------------------------------------------------------


def _reference_for(entry: ManifestEntry) -> RasterImage:
    layout = GridLayout.for_frames(entry.frame_count)
    if entry.source_svg:
        return render(load_svg(entry.source_svg), layout.cell, layout.cell, WHITE)
    return segment_grid(_load_png(entry.grid_png), layout)[-1]


def _eval_entry(job):
    entry, svg_dir = job
    doc = load_svg(Path(svg_dir) / entry.id / "out.svg")
    return evaluate(doc, _reference_for(entry)).to_dict()


def cmd_eval(args) -> int:
    if args.manifest:
        entries = list(Manifest.load(args.manifest).accepted())
        results, code = {}, EXIT_OK
        for job, (status, payload) in _pool(_eval_entry, [(e, args.svg_dir) for e in entries], _jobs(args)):
            if status == "ok":
                results[job[0].id] = payload
            else:
                _err(f"[fail] {job[0].id}: {payload[1]}")
                code = code or payload[0]
        print(json.dumps({k: results[k] for k in sorted(results)}, indent=2))
        return code
    if not (args.svg and args.reference):
        raise LayertraceError("eval needs OUT.svg and REFERENCE.png (or --manifest)")
    svg_path, ref_path = Path(args.svg), Path(args.reference)
    for p in (svg_path, ref_path):
        if not p.is_file():
            raise StorageError(f"no such file: {p}")
    doc = parse_svg(svg_path.read_text(encoding="utf-8"))
    report = evaluate(doc, _load_png(ref_path))
    print(report.to_json())
    return EXIT_OK


# -- generate / pipeline ---------------------------------------------------


def _client(args) -> InferenceClient:
    return InferenceClient.from_env(timeout=args.timeout)


def cmd_generate(args) -> int:
    layout = GridLayout.parse(args.layout)
    data = _client(args).generate(InferenceRequest.for_layout(args.prompt, layout, args.seed))
    out = Path(args.out)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_bytes(data)
    except OSError as e:
        raise StorageError(f"cannot write {out}: {e}") from e
    print(f"{layout} grid -> {out}")
    return EXIT_OK


def _image_grid(args) -> tuple[bytes | None, RasterImage]:
    """Use the image directly when it already is a grid, else ask the endpoint."""
    path = Path(args.image)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise StorageError(f"cannot read {path}: {e}") from e
    img = _load_png(path)
    if args.layout == "auto" and img.width == img.height:
        try:
            infer_layout(img)
            return None, img
        except LayertraceError:
            pass
    elif args.layout != "auto" and (img.width, img.height) == GridLayout.parse(args.layout).size:
        return None, img
    layout = GRID_DEFAULT if args.layout == "auto" else GridLayout.parse(args.layout)
    data = _client(args).generate(InferenceRequest.for_layout(args.prompt or "", layout, args.seed, raw))
    return data, _png_from_bytes(data)


def _png_from_bytes(data: bytes) -> RasterImage:
    png_size(data)
    with Image.open(io.BytesIO(data)) as im:
        im.load()
        return RasterImage.from_pil(im)


def cmd_pipeline(args) -> int:
    cfg = _pipeline_config(args)
    out_svg = Path(args.out)
    if args.image:
        data, grid = _image_grid(args)
    else:
        layout = GRID_DEFAULT if args.layout == "auto" else GridLayout.parse(args.layout)
        data = _client(args).generate(InferenceRequest.for_layout(args.prompt, layout, args.seed))
        grid = _png_from_bytes(data)
    if data is not None:
        try:
            out_svg.parent.mkdir(parents=True, exist_ok=True)
            (out_svg.parent / "grid.png").write_bytes(data)
        except OSError as e:
            raise StorageError(f"cannot write grid: {e}") from e
    result = vectorize_grid(grid, "auto", cfg)
    _write_result(result, out_svg, args.debug_layers)
    print(result.report.to_json())
    return EXIT_OK


# -- parser ----------------------------------------------------------------


def _add_pipeline_flags(p) -> None:
    p.add_argument("--config", help="TOML file with PipelineConfig fields")
    p.add_argument("--max-fit-error", type=float)
    p.add_argument("--dedup-mse", type=float)
    p.add_argument("--line-mode", choices=LINE_MODES)
    p.add_argument("--line-source", choices=LINE_SOURCES)
    p.add_argument("--workers", type=int, help="threads for per-layer tracing")
    p.add_argument("--debug-layers", action="store_true", help="also write layer-K.png inputs")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="layertrace", description="Layered SVG <-> serpentine frame grid toolkit.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("decompose", help="layered SVG -> cumulative frames + grid")
    p.add_argument("svg")
    p.add_argument("--frames", type=int, choices=(4, 9), default=9)
    p.add_argument("--isolate-lines", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--manifest", help="manifest to update (default OUT/manifest.json)")
    p.add_argument("--id")
    p.add_argument("--prompt", default="")
    p.add_argument("--style", choices=STYLES)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("vectorize", help="grid PNG -> layered SVG")
    p.add_argument("grid", nargs="?")
    p.add_argument("--layout", default="auto", choices=("auto", "2x2", "3x3"))
    p.add_argument("--out", default="out.svg")
    p.add_argument("--manifest", help="batch mode over manifest entries with a grid_png")
    p.add_argument("--out-dir", default="results", help="batch output root (one folder per entry)")
    p.add_argument("--jobs", type=int, default=0, help="batch worker processes (default: CPU count)")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_vectorize)

    p = sub.add_parser("eval", help="compare an SVG with a reference PNG")
    p.add_argument("svg", nargs="?")
    p.add_argument("reference", nargs="?")
    p.add_argument("--manifest", help="batch mode: evaluate SVG_DIR/<id>/out.svg per entry")
    p.add_argument("--svg-dir", default="results")
    p.add_argument("--jobs", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("generate", help="request a grid from the inference endpoint")
    p.add_argument("--prompt", required=True)
    p.add_argument("--layout", default="3x3", choices=("2x2", "3x3"))
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="grid.png")
    p.add_argument("--timeout", type=float, default=120.0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("pipeline", help="prompt or image -> grid -> layered SVG -> report")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--prompt")
    src.add_argument("--image")
    p.add_argument("--layout", default="auto", choices=("auto", "2x2", "3x3"))
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="out.svg")
    p.add_argument("--timeout", type=float, default=120.0)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_pipeline)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as e:
        code = exit_code(e)  # re-raises anything unexpected
        _err(str(e))
        return code


if __name__ == "__main__":
    sys.exit(main())
