"""Occupancy grid beliefs, ray casting and the beam-wise CSQMI information measure."""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from rainplan.errors import PoseOutsideGrid
from rainplan.world import BeamSensorConfig, RobotState, beam_mean

L_OCC = float(np.log(0.7 / 0.3))
L_FREE = -L_OCC
L_CLAMP = 10.0
UNKNOWN_BAND = (0.2, 0.8)
OVERLAP_THRESHOLD = 0.5
_EXP_CUTOFF = 750.0  # exp(-750) is below the smallest subnormal double


@dataclass(frozen=True)
class OccupancyGrid:
    log_odds: np.ndarray  # (rows, cols); row index grows with y
    resolution: float
    origin: tuple[float, float] = (0.0, 0.0)

    @classmethod
    def uniform(cls, rows: int, cols: int, resolution: float, p: float = 0.5, origin=(0.0, 0.0)):
        return cls(np.full((rows, cols), np.log(p / (1 - p))), resolution, tuple(origin))

    @classmethod
    def from_probabilities(cls, p: np.ndarray, resolution: float, origin=(0.0, 0.0)):
        p = np.asarray(p, dtype=float)
        return cls(np.log(p / (1 - p)), resolution, tuple(origin))

    @property
    def shape(self) -> tuple[int, int]:
        return self.log_odds.shape

    @property
    def rows(self) -> int:
        return self.log_odds.shape[0]

    @property
    def cols(self) -> int:
        return self.log_odds.shape[1]

    @property
    def extent(self) -> tuple[float, float]:
        return self.cols * self.resolution, self.rows * self.resolution

    def probabilities(self) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.log_odds))

    def cell_of(self, x, y):
        col = np.floor((np.asarray(x) - self.origin[0]) / self.resolution).astype(np.int64)
        row = np.floor((np.asarray(y) - self.origin[1]) / self.resolution).astype(np.int64)
        return row, col

    def contains(self, x, y):
        row, col = self.cell_of(x, y)
        return (row >= 0) & (row < self.rows) & (col >= 0) & (col < self.cols)


def binary_entropy(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 1e-300, 1.0)
    q = np.clip(1.0 - p, 1e-300, 1.0)
    return -(p * np.log(p) + q * np.log(q))


def grid_entropy(g: OccupancyGrid) -> float:
    return float(binary_entropy(g.probabilities()).sum())


# ray casting --------------------------------------------------------------


def max_cells(max_range: float, resolution: float) -> int:
    return 2 * int(np.ceil(max_range / resolution)) + 2


def ray_trace_batch(g: OccupancyGrid, origins: np.ndarray, headings: np.ndarray, max_range: float):
    """Grid traversal for many rays at once.

    Returns flat cell indices ``(N, K)`` padded with ``-1`` and entry distances
    ``(N, K)`` padded with ``inf``. The origin cell is always included; later
    cells are kept while their entry distance is below ``max_range`` and the
    ray is inside the grid.
    """
    origins = np.asarray(origins, dtype=float).reshape(-1, 2)
    headings = np.asarray(headings, dtype=float).reshape(-1)
    N = origins.shape[0]
    K = max_cells(max_range, g.resolution)
    res = g.resolution
    gx = (origins[:, 0] - g.origin[0]) / res
    gy = (origins[:, 1] - g.origin[1]) / res
    ix, iy = np.floor(gx).astype(np.int64), np.floor(gy).astype(np.int64)
    if np.any((ix < 0) | (ix >= g.cols) | (iy < 0) | (iy >= g.rows)):
        raise PoseOutsideGrid("ray origin outside the grid")
    c, s = np.cos(headings), np.sin(headings)
    step_x = np.where(c > 0, 1, -1)
    step_y = np.where(s > 0, 1, -1)
    with np.errstate(divide="ignore", invalid="ignore"):
        dx = np.where(c != 0, res / np.abs(c), np.inf)
        dy = np.where(s != 0, res / np.abs(s), np.inf)
        tx = np.where(c > 0, (ix + 1 - gx) * dx, np.where(c < 0, (gx - ix) * dx, np.inf))
        ty = np.where(s > 0, (iy + 1 - gy) * dy, np.where(s < 0, (gy - iy) * dy, np.inf))
    cells = np.full((N, K), -1, dtype=np.int64)
    dists = np.full((N, K), np.inf)
    cells[:, 0] = iy * g.cols + ix
    dists[:, 0] = 0.0
    alive = np.ones(N, dtype=bool)
    for k in range(1, K):
        move_x = tx <= ty
        t_enter = np.where(move_x, tx, ty)
        ix = np.where(move_x, ix + step_x, ix)
        iy = np.where(move_x, iy, iy + step_y)
        tx = np.where(move_x, tx + dx, tx)
        ty = np.where(move_x, ty, ty + dy)
        alive &= (t_enter < max_range) & (ix >= 0) & (ix < g.cols) & (iy >= 0) & (iy < g.rows)
        if not alive.any():
            break
        cells[alive, k] = (iy * g.cols + ix)[alive]
        dists[alive, k] = t_enter[alive]
    return cells, dists


def ray_trace(g: OccupancyGrid, start: Sequence[float], heading: float, max_range: float):
    """Cells ``(row, col)`` crossed by one ray, with the distance at which each is entered."""
    cells, dists = ray_trace_batch(g, np.asarray(start, dtype=float)[None], np.array([heading]), max_range)
    out = []
    for cell, d in zip(cells[0], dists[0]):
        if cell < 0:
            break
        out.append(((int(cell // g.cols), int(cell % g.cols)), float(d)))
    return out


def beam_origins(poses: np.ndarray, cfg: BeamSensorConfig):
    """Origins ``(..., B, 2)`` and headings ``(..., B)`` of all beams of each pose."""
    poses = np.asarray(poses, dtype=float)
    heads = poses[..., 2:3] + cfg.beam_angles()
    origins = np.broadcast_to(poses[..., None, :2], heads.shape + (2,))
    return origins, heads


def first_hits(truth: np.ndarray, cells: np.ndarray, dists: np.ndarray) -> np.ndarray:
    """Distance to the first truly occupied cell along each traced ray (``inf`` if none)."""
    flat = truth.reshape(-1)
    occ = (cells >= 0) & flat[np.maximum(cells, 0)]
    hit = np.where(occ, dists, np.inf)
    return hit.min(axis=-1)


# information --------------------------------------------------------------


def beam_csqmi(p: np.ndarray, dists: np.ndarray, cfg: BeamSensorConfig) -> np.ndarray:
    """Cauchy-Schwarz quadratic mutual information between a beam reading and its cells.

    ``p`` and ``dists`` are ``(..., K)`` occupancy probabilities and entry
    distances of the cells along each beam; padding cells carry ``p = 0``.
    The reading given "first hit in cell i" is Gaussian around the beam mean
    for distance ``d_i``; with no hit it saturates at ``z_max``.  Gaussian
    normalizers cancel, leaving

        I = log sum_i a_i + log(prod_k s_k sum_ij P_i P_j K_ij) - 2 log sum_ij a_i P_j K_ij

    where ``P_i`` is the event probability, ``a_i`` the sum of squared
    configuration probabilities inside event ``i``, ``s_k = p_k^2 + (1-p_k)^2``
    and ``K_ij = exp(-(mu_i - mu_j)^2 / (4 sigma^2))``.
    """
    p = np.asarray(p, dtype=float)
    free = 1.0 - p
    ones = np.ones(p.shape[:-1] + (1,))
    reach = np.concatenate([ones, np.cumprod(free, axis=-1)], axis=-1)  # (..., K+1)
    s = p * p + free * free
    tail = np.concatenate([np.cumprod(s[..., ::-1], axis=-1)[..., ::-1][..., 1:], ones], axis=-1)
    reach_sq = np.concatenate([ones, np.cumprod(free * free, axis=-1)], axis=-1)
    # events 0..K-1 are "first hit at cell k", event K is "no hit"
    P = np.concatenate([reach[..., :-1] * p, reach[..., -1:]], axis=-1)
    a = np.concatenate([reach_sq[..., :-1] * p * p * tail, reach_sq[..., -1:]], axis=-1)
    d = np.where(np.isfinite(dists), dists, np.inf)
    mu = np.concatenate([beam_mean(d, cfg), np.full(ones.shape, cfg.z_max)], axis=-1)
    expo = ((mu[..., :, None] - mu[..., None, :]) ** 2) / (4 * cfg.sigma**2)
    # with narrow beams nearly every pair underflows, so only exponentiate the rest
    near = expo < _EXP_CUTOFF
    Kmat = np.exp(-expo, out=np.zeros_like(expo), where=near)
    KP = Kmat @ P[..., None]
    t1 = a.sum(-1)
    t2 = np.prod(s, axis=-1) * (P[..., None, :] @ KP)[..., 0, 0]
    t3 = (a[..., None, :] @ KP)[..., 0, 0]
    val = np.log(t1) + np.log(t2) - 2 * np.log(t3)
    return np.maximum(val, 0.0)


def cell_weights(p: np.ndarray) -> np.ndarray:
    """Share of a beam's information attributed to each of its cells.

    Each cell weighs in by the probability that the beam reaches it times
    its binary entropy; rows with no uncertainty get zero weights.
    """
    free = 1.0 - p
    reach = np.concatenate([np.ones(p.shape[:-1] + (1,)), np.cumprod(free, axis=-1)[..., :-1]], axis=-1)
    w = reach * binary_entropy(p) * (p > 0)
    tot = w.sum(-1, keepdims=True)
    return np.divide(w, tot, out=np.zeros_like(w), where=tot > 0)


@dataclass(frozen=True)
class BeamSet:
    """Traced beams of a batch of poses: ``(..., B, K)`` cells, probabilities and info."""

    cells: np.ndarray
    p: np.ndarray
    info: np.ndarray  # (..., B)

    @property
    def unknown(self) -> np.ndarray:
        lo, hi = UNKNOWN_BAND
        return (self.cells >= 0) & (self.p >= lo) & (self.p <= hi)


def trace_beams(g: OccupancyGrid, poses: np.ndarray, cfg: BeamSensorConfig) -> BeamSet:
    poses = np.asarray(poses, dtype=float)
    lead = poses.shape[:-1]
    # candidate sequences share prefixes, so trace each distinct pose once
    uniq, inverse = np.unique(poses.reshape(-1, 3), axis=0, return_inverse=True)
    origins, heads = beam_origins(uniq, cfg)
    cells, dists = ray_trace_batch(g, origins.reshape(-1, 2), heads.reshape(-1), cfg.z_max)
    K = cells.shape[-1]
    cells = cells.reshape(heads.shape + (K,))
    dists = dists.reshape(heads.shape + (K,))
    prob = g.probabilities().reshape(-1)
    p = np.where(cells >= 0, prob[np.maximum(cells, 0)], 0.0)
    info = beam_csqmi(p, dists, cfg)
    inverse = inverse.reshape(lead)
    return BeamSet(cells[inverse], p[inverse], info[inverse])


def pruned_beam_sum(beams: list[tuple[np.ndarray, float]], threshold: float = OVERLAP_THRESHOLD) -> float:
    """Add beam values in order, dropping any beam whose unknown cells overlap an
    accepted beam's by more than ``threshold`` of its own unknown count."""
    accepted: list[set] = []
    total = 0.0
    for unknown_cells, val in beams:
        own = set(unknown_cells.tolist())
        if own and any(len(own & other) > threshold * len(own) for other in accepted):
            continue
        accepted.append(own)
        total += val
    return total


def csqmi(
    g: OccupancyGrid,
    poses: Sequence[RobotState],
    cfg: BeamSensorConfig,
    threshold: float = OVERLAP_THRESHOLD,
) -> float:
    """Beam-additive CSQMI of a pose list with overlap pruning of dependent beams."""
    if len(poses) == 0:
        return 0.0
    arr = np.array([[s.x1, s.x2, s.theta] for s in poses])
    if not np.all(g.contains(arr[:, 0], arr[:, 1])):
        raise PoseOutsideGrid("pose outside the grid")
    bs = trace_beams(g, arr, cfg)
    unk = bs.unknown
    beams = []
    for a in range(arr.shape[0]):
        for b in range(cfg.num_beams):
            beams.append((bs.cells[a, b][unk[a, b]], float(bs.info[a, b])))
    return pruned_beam_sum(beams, threshold)


# map updates --------------------------------------------------------------


def grid_update(
    g: OccupancyGrid,
    pose: RobotState,
    beam_ranges: Sequence[float],
    cfg: BeamSensorConfig,
) -> OccupancyGrid:
    """Log-odds inverse-sensor update for one scan.

    Readings at or beyond ``z_max`` mark every traversed cell free; shorter
    readings mark the traversed cells before the hit free and the hit cell
    occupied. ``nan`` readings are skipped.
    """
    if not g.contains(pose.x1, pose.x2):
        raise PoseOutsideGrid("pose outside the grid")
    ranges = np.asarray(beam_ranges, dtype=float)
    if ranges.shape != (cfg.num_beams,):
        raise ValueError(f"expected {cfg.num_beams} readings, got {ranges.shape}")
    ok = np.isfinite(ranges)
    heads = pose.theta + cfg.beam_angles()
    origins = np.tile([pose.x1, pose.x2], (cfg.num_beams, 1))
    cells, dists = ray_trace_batch(g, origins, heads, cfg.z_max)
    hit = ok & (ranges < cfg.z_max)
    reach = np.where(hit, ranges, cfg.z_max)
    valid = (cells >= 0) & ok[:, None]
    nxt = np.concatenate([dists[:, 1:], np.full((cfg.num_beams, 1), np.inf)], axis=1)
    hit_cell = valid & hit[:, None] & (dists <= reach[:, None]) & (nxt > reach[:, None])
    free_cell = valid & (dists <= reach[:, None]) & ~hit_cell
    delta = np.zeros(g.rows * g.cols)
    # a cell crossed by several beams is updated once per reading category
    np.add.at(delta, np.unique(cells[free_cell]), L_FREE)
    np.add.at(delta, np.unique(cells[hit_cell]), L_OCC)
    lo = np.clip(g.log_odds + delta.reshape(g.shape), -L_CLAMP, L_CLAMP)
    return replace(g, log_odds=lo)


def simulate_scan(truth: np.ndarray, g: OccupancyGrid, pose: RobotState, cfg: BeamSensorConfig,
                  rng: np.random.Generator) -> np.ndarray:
    """Noisy readings against a boolean ground-truth map sharing ``g``'s geometry.

    Readings shorter than ``z_min`` are returned as ``nan`` (no usable return).
    """
    heads = pose.theta + cfg.beam_angles()
    origins = np.tile([pose.x1, pose.x2], (cfg.num_beams, 1))
    cells, dists = ray_trace_batch(g, origins, heads, cfg.z_max)
    d = first_hits(truth, cells, dists)
    noise = rng.normal(0.0, cfg.sigma, cfg.num_beams)
    z = np.where(np.isfinite(d), d + noise, cfg.z_max)
    z = np.where(z >= cfg.z_max, cfg.z_max, z)
    return np.where(np.isfinite(d) & (d < cfg.z_min), np.nan, np.maximum(z, 0.0))


# portable graymap io ------------------------------------------------------


def write_pgm(path: str | Path, g: OccupancyGrid) -> None:
    """Write belief as 8-bit PGM (white = free, top row = largest y) plus a ``.meta.txt`` sidecar."""
    path = Path(path)
    img = np.round(255 * (1.0 - g.probabilities())).astype(np.uint8)[::-1]
    with open(path, "wb") as fh:
        fh.write(f"P5\n{g.cols} {g.rows}\n255\n".encode())
        fh.write(img.tobytes())
    meta = path.with_suffix(".meta.txt")
    meta.write_text(
        f"resolution {g.resolution!r}\norigin {g.origin[0]!r} {g.origin[1]!r}\nrows {g.rows}\ncols {g.cols}\n"
    )


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a binary or ASCII PGM as a ``uint8`` array with row 0 at the smallest y."""
    data = Path(path).read_bytes()
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval > 255:
        raise ValueError("only 8-bit PGM is supported")
    if magic == b"P5":
        img = np.frombuffer(data[pos + 1:pos + 1 + w * h], dtype=np.uint8).reshape(h, w)
    elif magic == b"P2":
        img = np.array(data[pos:].split(), dtype=np.uint8).reshape(h, w)
    else:
        raise ValueError(f"unsupported PGM magic {magic!r}")
    return img[::-1].copy()
