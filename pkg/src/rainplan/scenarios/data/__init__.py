"""Bundled ground-truth maps and landmark layouts.

The maps are drawn by :func:`draw_map` and shipped as PGM files; a test keeps
the two in sync. Free cells are white, occupied cells black.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from rainplan.estimation.grid import read_pgm

DATA_DIR = Path(__file__).resolve().parent
MAP_RESOLUTION = 0.25
MAP_CELLS = 80  # 20 m square at 0.25 m per cell


def _fill(occ: np.ndarray, x0: float, y0: float, x1: float, y1: float) -> None:
    r = MAP_RESOLUTION
    occ[int(round(y0 / r)):int(round(y1 / r)), int(round(x0 / r)):int(round(x1 / r))] = True


def draw_map(kind: str) -> np.ndarray:
    """Boolean occupancy (row 0 at the smallest y) of a bundled map layout."""
    occ = np.zeros((MAP_CELLS, MAP_CELLS), dtype=bool)
    size = MAP_CELLS * MAP_RESOLUTION
    for x0, y0, x1, y1 in ((0, 0, size, 0.5), (0, size - 0.5, size, size), (0, 0, 0.5, size), (size - 0.5, 0, size, size)):
        _fill(occ, x0, y0, x1, y1)
    if kind == "squares":
        for cx in (4.0, 10.0, 16.0):
            for cy in (4.0, 10.0, 16.0):
                _fill(occ, cx - 1.0, cy - 1.0, cx + 1.0, cy + 1.0)
    elif kind == "corridor":
        # two long walls with doorways split the area into three corridors
        _fill(occ, 0.5, 6.5, 15.0, 7.0)
        _fill(occ, 5.0, 13.0, 19.5, 13.5)
        _fill(occ, 9.75, 0.5, 10.25, 3.5)
        _fill(occ, 9.75, 16.5, 10.25, 19.5)
    else:
        raise ValueError(f"unknown map {kind!r}")
    return occ


def map_path(kind: str) -> Path:
    return DATA_DIR / f"{kind}.pgm"


def load_map(kind: str) -> np.ndarray:
    """Occupied-cell mask of a bundled map (pixels darker than mid-grey)."""
    return read_pgm(map_path(kind)) < 128


def write_map(kind: str, path: Path | None = None) -> Path:
    path = path or map_path(kind)
    img = np.where(draw_map(kind), 0, 255).astype(np.uint8)[::-1]
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        fh.write(img.tobytes())
    return path


def load_landmarks(path: Path | None = None) -> np.ndarray:
    """Landmark positions ``(M, 3)`` ordered by id."""
    with open(path or DATA_DIR / "landmarks.csv", newline="") as fh:
        rows = sorted((int(r["id"]), float(r["x"]), float(r["y"]), float(r["z"])) for r in csv.DictReader(fh))
    return np.array([r[1:] for r in rows])
