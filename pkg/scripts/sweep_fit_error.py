"""Trade fidelity against path size: corpus MSE and segment count per max_fit_error.

Usage: python3 scripts/sweep_fit_error.py [corpus_dir] [--values 0.2 0.3 0.5 1.0 1.5]
"""

import argparse
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from layertrace.assembler import PipelineConfig
from layertrace.svg_doc import iter_paths

from run_corpus import ROOT, round_trip


def segments(doc) -> int:
    return sum(len(sp.segments) for p in iter_paths(doc.root) for sp in p.data.subpaths)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("corpus", nargs="?", default=str(ROOT / "tests" / "corpus"))
    ap.add_argument("--values", type=float, nargs="+", default=[0.2, 0.3, 0.5, 1.0, 1.5])
    args = ap.parse_args()
    icons = sorted(Path(args.corpus).glob("*.svg"))
    print(f"{'max_fit_error':>13s} {'mean mse':>9s} {'max mse':>9s} {'segments':>8s} {'secs':>6s}")
    for v in args.values:
        base = PipelineConfig()
        cfg = replace(base, trace=replace(base.trace, max_fit_error=v))
        t0 = time.perf_counter()
        runs = [round_trip(p, cfg) for p in icons]
        errs = [rep.mse for _, _, rep, _ in runs]
        segs = sum(segments(res.svg) for _, res, _, _ in runs)
        print(f"{v:13.2f} {np.mean(errs):9.2e} {max(errs):9.2e} {segs:8d} {time.perf_counter() - t0:6.1f}", flush=True)


if __name__ == "__main__":
    main()
