"""Serpentine (boustrophedon) grids of temporally ordered frames."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, UnknownResolution, WrongCellSize, WrongFrameCount
from .raster import RasterImage

_CELL = {(2, 2): 512, (3, 3): 352}


@dataclass(frozen=True)
class GridLayout:
    rows: int
    cols: int
    cell: int

    def __post_init__(self):
        if _CELL.get((self.rows, self.cols)) != self.cell:
            raise ValueError(f"unsupported layout {self.rows}x{self.cols} with {self.cell}px cells")

    @property
    def count(self) -> int:
        return self.rows * self.cols

    @property
    def size(self) -> tuple[int, int]:
        """Canvas (width, height) in pixels."""
        return (self.cols * self.cell, self.rows * self.cell)

    @classmethod
    def for_frames(cls, n: int) -> "GridLayout":
        if n == 4:
            return GRID_2X2
        if n == 9:
            return GRID_3X3
        raise WrongFrameCount(f"no layout for {n} frames")

    @classmethod
    def parse(cls, text: str) -> "GridLayout":
        try:
            r, c = (int(v) for v in text.lower().split("x"))
            return cls(r, c, _CELL[(r, c)])
        except (ValueError, KeyError):
            raise ValueError(f"layout must be 2x2 or 3x3, got {text!r}") from None

    def __str__(self) -> str:
        return f"{self.rows}x{self.cols}"


GRID_2X2 = GridLayout(2, 2, 512)
GRID_3X3 = GridLayout(3, 3, 352)


def serpentine_index(t: int, layout: GridLayout) -> tuple[int, int]:
    """Cell (row, col) of temporal index t; odd rows run right to left."""
    if not 0 <= t < layout.count:
        raise IndexOutOfRange(f"t={t} outside 0..{layout.count - 1}")
    row, k = divmod(t, layout.cols)
    return (row, k if row % 2 == 0 else layout.cols - 1 - k)


def compose_grid(frames, layout: GridLayout) -> RasterImage:
    if len(frames) != layout.count:
        raise WrongFrameCount(f"{layout} grid needs {layout.count} frames, got {len(frames)}")
    c = layout.cell
    canvas = np.zeros((layout.rows * c, layout.cols * c, 4), np.uint8)
    for t, f in enumerate(frames):
        if f.shape != (c, c) or f.channels != 4:
            raise WrongCellSize(f"frame {t} is {f.width}x{f.height}x{f.channels}, want {c}x{c}x4")
        r, k = serpentine_index(t, layout)
        canvas[r * c : (r + 1) * c, k * c : (k + 1) * c] = f.data
    return RasterImage(canvas)


def segment_grid(image: RasterImage, layout: GridLayout) -> list[RasterImage]:
    """Cut a grid into cells, returned in temporal order."""
    w, h = layout.size
    if (image.width, image.height) != (w, h):
        raise DimensionMismatch(f"{layout} grid must be {w}x{h}, got {image.width}x{image.height}")
    c = layout.cell
    cells = []
    for t in range(layout.count):
        r, k = serpentine_index(t, layout)
        cells.append(RasterImage(image.data[r * c : (r + 1) * c, k * c : (k + 1) * c].copy()))
    return cells


def infer_layout(image: RasterImage) -> GridLayout:
    size = (image.width, image.height)
    for layout in (GRID_3X3, GRID_2X2):
        if size == layout.size:
            return layout
    raise UnknownResolution(f"no grid layout has resolution {size[0]}x{size[1]}")
