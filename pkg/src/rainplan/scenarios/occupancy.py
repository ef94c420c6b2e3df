"""Multi-robot occupancy mapping with beam sensors and a CSQMI objective."""
from __future__ import annotations

import numpy as np

from rainplan.estimation.grid import (
    OVERLAP_THRESHOLD,
    OccupancyGrid,
    cell_weights,
    grid_entropy,
    grid_update,
    pruned_beam_sum,
    simulate_scan,
    trace_beams,
)
from rainplan.planning.objective import PrimitiveLibrary, primitive_segments
from rainplan.scenarios.config import STREAM_INIT, STREAM_NOISE, ScenarioConfig, substream
from rainplan.scenarios.data import MAP_RESOLUTION, load_map
from rainplan.scenarios.metrics import TrialRecord
from rainplan.setfn import SetObjective
from rainplan.world import RobotState, unicycle_step_batch, rollout_poses

CSQMI_MODES = ("window", "step", "prune")


class GridTeamObjective:
    """Team CSQMI over candidate pose sequences.

    Every beam's closed-form CSQMI is split over its cells in proportion to
    reach probability times cell entropy. In ``"window"`` mode a cell counts
    once per plan window with the largest credit any chosen beam gives it; in
    ``"step"`` mode once per timestep. Both are facility-location functions,
    hence monotone submodular. ``"prune"`` sums whole-beam values and drops
    beams whose unknown cells mostly overlap an already accepted beam; it is
    not guaranteed monotone.

    ``beams[r]`` is the :class:`BeamSet` of robot ``r``'s candidates with
    leading shape ``(C, T)``; ``valid[r]`` flags which candidates are safe to
    execute. Invalid candidates contribute nothing. ``ncells`` is the number
    of grid cells.
    """

    def __init__(self, beams: dict, valid: dict, ncells: int, mode: str = "window",
                 threshold: float = OVERLAP_THRESHOLD):
        if mode not in CSQMI_MODES:
            raise ValueError(f"unknown csqmi mode {mode!r}")
        self.mode = mode
        self.ncells = ncells
        self.threshold = threshold
        self.beams = beams
        self.valid = valid
        self.robots = sorted(beams)
        self.submodular = mode != "prune"
        if self.submodular:
            self._credit = self._credit_tables()

    def num_candidates(self, robot: int) -> int:
        return self.beams[robot].info.shape[0]

    def _credit_tables(self) -> dict:
        keys, credits = {}, {}
        for r in self.robots:
            bs = self.beams[r]
            C, T = bs.info.shape[:2]
            credit = bs.info[..., None] * cell_weights(bs.p)
            key = bs.cells
            if self.mode == "step":
                key = np.arange(T)[None, :, None, None] * self.ncells + bs.cells
            ok = (bs.cells >= 0) & (credit > 0) & self.valid[r][:, None, None, None]
            cand = np.broadcast_to(np.arange(C)[:, None, None, None], key.shape)
            keys[r] = (cand[ok], key[ok])
            credits[r] = credit[ok]
        # one compact column space shared by all robots
        cols = np.unique(np.concatenate([keys[r][1] for r in self.robots] + [np.zeros(0, dtype=np.int64)]))
        tables = {}
        for r in self.robots:
            cand, key = keys[r]
            table = np.zeros((self.num_candidates(r), len(cols)))
            np.maximum.at(table, (cand, np.searchsorted(cols, key)), credits[r])
            tables[r] = table
        return tables

    def _context(self, elements) -> np.ndarray:
        width = self._credit[self.robots[0]].shape[1]
        ctx = np.zeros(width)
        for r, c in elements:
            np.maximum(ctx, self._credit[r][c], out=ctx)
        return ctx

    def value(self, elements) -> float:
        elements = list(elements)
        if not elements:
            return 0.0
        if self.submodular:
            return float(self._context(elements).sum())
        return self._pruned_value(elements)

    def best_response(self, robot: int, fixed) -> tuple[int, float]:
        if not self.submodular:
            vals = [self.value(list(fixed) + [(robot, c)]) for c in range(self.num_candidates(robot))]
            idx = int(np.argmax(vals))
            return idx, float(vals[idx])
        ctx = self._context(fixed)
        vals = np.maximum(self._credit[robot], ctx).sum(axis=1)
        idx = int(np.argmax(vals))
        return idx, float(vals[idx])

    def _pruned_value(self, elements) -> float:
        beams = []
        for r, c in sorted(elements):
            if not self.valid[r][c]:
                continue
            bs = self.beams[r]
            unk = bs.unknown[c]
            for t in range(bs.info.shape[1]):
                for b in range(bs.info.shape[2]):
                    beams.append((bs.cells[c, t, b][unk[t, b]], float(bs.info[c, t, b])))
        return pruned_beam_sum(beams, self.threshold)


def _free_poses(rng, truth: np.ndarray, count: int, lo: float, hi: float, min_sep: float, clearance: float,
                max_tries: int = 10_000) -> np.ndarray:
    """Poses in free space at least ``clearance`` from walls and ``min_sep`` apart."""
    res = MAP_RESOLUTION
    pad = int(np.ceil(clearance / res))
    pts: list[np.ndarray] = []
    for _ in range(max_tries):
        if len(pts) == count:
            break
        p = rng.uniform(lo, hi, 2)
        i, j = int(p[1] // res), int(p[0] // res)
        block = truth[max(i - pad, 0):i + pad + 1, max(j - pad, 0):j + pad + 1]
        if block.any() or any(np.linalg.norm(p - o) < min_sep for o in pts):
            continue
        pts.append(p)
    if len(pts) < count:
        raise ValueError("could not place robots in free space")
    xy = np.array(pts)
    return np.column_stack([xy, rng.uniform(-np.pi, np.pi, count)])


class OccupancySim:
    def __init__(self, cfg: ScenarioConfig, seed: int):
        self.cfg = cfg
        self.robots = list(range(cfg.n))
        self.truth = load_map(cfg.map_kind)
        rows, cols = self.truth.shape
        self.grid = OccupancyGrid.uniform(rows, cols, MAP_RESOLUTION)
        lo, hi = cfg.bounds
        self.poses = _free_poses(substream(seed, STREAM_INIT), self.truth, cfg.n, lo, hi, cfg.min_separation, 0.5)
        self.initial_poses = self.poses.copy()
        self.noise_rng = substream(seed, STREAM_NOISE)
        self.library = PrimitiveLibrary(
            np.asarray(cfg.controls, dtype=float), primitive_segments(cfg.horizon.t_plan, cfg.plan_segments)
        )
        self._sequences = self.library.sequences()
        self.collisions = 0
        self.initial_entropy = grid_entropy(self.grid)

    def _safe(self, poses: np.ndarray, belief: np.ndarray) -> np.ndarray:
        """Whether every pose of each sequence ``(..., T, 3)`` sits in a cell believed free enough."""
        g = self.grid
        inside = g.contains(poses[..., 0], poses[..., 1])
        idx = np.where(inside[..., None], poses[..., :2], 0.0)
        row, col = g.cell_of(idx[..., 0], idx[..., 1])
        row = np.clip(row, 0, g.rows - 1)
        col = np.clip(col, 0, g.cols - 1)
        ok = inside & (belief[row, col] < self.cfg.occupied_threshold)
        return ok.all(axis=-1)

    def _clamp(self, poses: np.ndarray) -> np.ndarray:
        g = self.grid
        (x0, y0), (w, h) = g.origin, g.extent
        eps = 1e-6 * g.resolution
        out = poses.copy()
        out[..., 0] = np.clip(out[..., 0], x0 + eps, x0 + w - eps)
        out[..., 1] = np.clip(out[..., 1], y0 + eps, y0 + h - eps)
        return out

    def _objective(self, sequences: dict) -> GridTeamObjective:
        prob = self.grid.probabilities()
        beams, valid = {}, {}
        for r, seqs in sequences.items():
            poses = rollout_poses(self.poses[r], seqs, self.cfg.tau)
            valid[r] = self._safe(poses, prob)
            # sequences leaving the map are invalid; clamp them so their beams can still be traced
            beams[r] = trace_beams(self.grid, self._clamp(poses), self.cfg.beam)
        return GridTeamObjective(beams, valid, self.grid.rows * self.grid.cols, self.cfg.csqmi_mode)

    def planning_objective(self) -> GridTeamObjective:
        return self._objective({r: self._sequences for r in self.robots})

    def plan_controls(self, obj, assignment) -> dict:
        return {r: self._sequences[assignment.plans[r]] for r in self.robots}

    def attack_objective(self, controls: dict, k: int) -> SetObjective:
        obj = self._objective({r: controls[r][None, k:] for r in self.robots})
        return SetObjective(list(self.robots), lambda s: obj.value([(r, 0) for r in s]), obj.submodular)

    def step(self, controls: dict, attacked: frozenset) -> None:
        u = np.array([controls[r] for r in self.robots])
        nxt = unicycle_step_batch(self.poses, u, self.cfg.tau)
        g = self.grid
        inside = g.contains(nxt[:, 0], nxt[:, 1])
        for r in self.robots:
            if inside[r]:
                i, j = g.cell_of(nxt[r, 0], nxt[r, 1])
                inside[r] = not self.truth[int(i), int(j)]
        # a robot that would enter an obstacle or leave the map stays where it is
        self.collisions += int((~inside).sum())
        self.poses = np.where(inside[:, None], nxt, self.poses)
        for r in self.robots:
            if r in attacked:
                continue
            pose = RobotState(*self.poses[r])
            z = simulate_scan(self.truth, self.grid, pose, self.cfg.beam, self.noise_rng)
            self.grid = grid_update(self.grid, pose, z, self.cfg.beam)

    def record(self, t: int, attacked: frozenset, plan_seconds: float) -> TrialRecord:
        return TrialRecord(t, tuple(sorted(attacked)), plan_seconds, grid_entropy=grid_entropy(self.grid))
