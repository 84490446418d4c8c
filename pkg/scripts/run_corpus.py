"""Round-trip the desk corpus: decompose, compose a 3x3 grid, vectorize, evaluate.

Usage: python3 scripts/run_corpus.py [corpus_dir] [--out DIR] [--max-fit-error E]
"""

import argparse
import time
from dataclasses import replace
from pathlib import Path

from layertrace.assembler import PipelineConfig, vectorize_grid
from layertrace.decomposer import build_sequence
from layertrace.grid import GRID_3X3, compose_grid
from layertrace.metrics import evaluate
from layertrace.raster import render
from layertrace.svg_doc import WHITE, iter_paths, serialize_svg
from layertrace.svg_parse import load_svg

ROOT = Path(__file__).resolve().parent.parent


def round_trip(svg_path: Path, cfg: PipelineConfig):
    doc = load_svg(svg_path)
    seq = build_sequence(doc, 9, isolate_lines=svg_path.name.startswith("outline"), source_id=svg_path.stem)
    cell = GRID_3X3.cell
    grid = compose_grid(seq.render(cell), GRID_3X3)
    t0 = time.perf_counter()
    result = vectorize_grid(grid, GRID_3X3, cfg)
    secs = time.perf_counter() - t0
    ref = render(doc, cell, cell, WHITE)
    return doc, result, evaluate(result, ref), secs


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("corpus", nargs="?", default=str(ROOT / "tests" / "corpus"))
    ap.add_argument("--out", default=None)
    ap.add_argument("--max-fit-error", type=float, default=None)
    args = ap.parse_args()
    cfg = PipelineConfig()
    if args.max_fit_error is not None:
        cfg = replace(cfg, trace=replace(cfg.trace, max_fit_error=args.max_fit_error))
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    rows = []
    for p in sorted(Path(args.corpus).glob("*.svg")):
        doc, res, rep, secs = round_trip(p, cfg)
        src_paths = sum(1 for _ in iter_paths(doc.root))
        rows.append((p.stem, rep.mse, rep.ssim, rep.path_count, src_paths, len(res.kept_frames), secs))
        print(f"{p.stem:16s} mse={rep.mse:.2e} ssim={rep.ssim:.4f} paths={rep.path_count:3d} src={src_paths:3d} "
              f"kept={len(res.kept_frames)} lines={res.has_line_layer} {secs:.2f}s", flush=True)
        if out:
            (out / f"{p.stem}.svg").write_text(serialize_svg(res.svg))
    n = len(rows)
    print(f"mean mse={sum(r[1] for r in rows) / n:.2e} max mse={max(r[1] for r in rows):.2e} "
          f"mean paths={sum(r[3] for r in rows) / n:.1f} max secs={max(r[6] for r in rows):.2f}")


if __name__ == "__main__":
    main()
