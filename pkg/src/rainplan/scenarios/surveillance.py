"""Persistent surveillance of static landmarks whose uncertainty grows while unvisited."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rainplan.errors import TargetAtSensor
from rainplan.estimation.gaussian import GaussianBelief, InfoRollout, ekf_update, gaussian_entropy, symmetrize
from rainplan.planning.objective import GaussianTeamObjective, PrimitiveLibrary, primitive_segments
from rainplan.scenarios.config import STREAM_INIT, STREAM_NOISE, ScenarioConfig, substream
from rainplan.scenarios.metrics import TrialRecord
from rainplan.scenarios.tracking import spread_points
from rainplan.setfn import SetObjective
from rainplan.world import RobotState, range_only_info_batch, range_only_observe, rollout_poses, unicycle_step_batch


@dataclass
class LandmarkModel:
    """Static landmark block whose process noise grows with time since the last visit."""

    q: float
    dim: int = 3
    obs_dim: int = 3  # range information spans the whole position block
    process: str = "revisit"

    @property
    def F(self) -> np.ndarray:
        return np.eye(3)

    @property
    def W(self) -> np.ndarray:
        return np.zeros((3, 3))


class SurveillanceSim:
    def __init__(self, cfg: ScenarioConfig, seed: int):
        self.cfg = cfg
        self.robots = list(range(cfg.n))
        self.model = LandmarkModel(cfg.q)
        self.landmarks = np.asarray(cfg.landmarks, dtype=float)
        M = len(self.landmarks)
        lo, hi = cfg.bounds
        init = substream(seed, STREAM_INIT)
        xy = spread_points(init, cfg.n, lo, hi, cfg.min_separation)
        self.poses = np.column_stack([xy, init.uniform(-np.pi, np.pi, cfg.n)])
        self.initial_poses = self.poses.copy()
        # landmark positions are known; the unit prior makes the first visit informative
        self.mean = self.landmarks.copy()
        self.cov = np.broadcast_to(np.eye(3), (M, 3, 3)).copy()
        self.k = np.zeros(M, dtype=int)
        self.noise_rng = substream(seed, STREAM_NOISE)
        self.library = PrimitiveLibrary(
            np.asarray(cfg.controls, dtype=float), primitive_segments(cfg.horizon.t_plan, cfg.plan_segments)
        )
        self._sequences = self.library.sequences()
        self._observed = np.zeros(M, dtype=bool)

    def _positions(self, poses: np.ndarray) -> np.ndarray:
        alt = np.full(poses.shape[:-1] + (1,), self.cfg.altitude)
        return np.concatenate([poses[..., :2], alt], axis=-1)

    def _objective(self, sequences: dict, trees: dict | None = None) -> GaussianTeamObjective:
        T = next(iter(sequences.values())).shape[-2]
        infos, seens = {}, {}
        for r, seqs in sequences.items():
            pos = self._positions(rollout_poses(self.poses[r], seqs, self.cfg.tau))
            info, seen = range_only_info_batch(pos, self.mean, self.cfg.sensor.r_sense)
            infos[r], seens[r] = info, seen
        rollout = InfoRollout(self.model, self.cov.copy(), T, k0=self.k.copy())
        return GaussianTeamObjective(rollout, infos, seens, trees)

    def planning_objective(self) -> GaussianTeamObjective:
        tree = (self.library.branching, self.library.segments)
        return self._objective({r: self._sequences for r in self.robots}, {r: tree for r in self.robots})

    def plan_controls(self, obj, assignment) -> dict:
        return {r: self._sequences[assignment.plans[r]] for r in self.robots}

    def attack_objective(self, controls: dict, k: int) -> SetObjective:
        obj = self._objective({r: controls[r][None, k:] for r in self.robots})
        return SetObjective(list(self.robots), lambda s: obj.value([(r, 0) for r in s]))

    def step(self, controls: dict, attacked: frozenset) -> None:
        cfg = self.cfg
        u = np.array([controls[r] for r in self.robots])
        self.poses = unicycle_step_batch(self.poses, u, cfg.tau)
        self.k += 1
        self.cov = symmetrize(self.cov + (cfg.q * self.k)[:, None, None] * np.eye(3))
        observed = np.zeros(len(self.landmarks), dtype=bool)
        for r in self.robots:
            if r in attacked:
                continue
            x, y, th = self.poses[r]
            state = RobotState(x, y, th, cfg.altitude)
            for m in range(len(self.landmarks)):
                try:
                    truth = range_only_observe(state, self.landmarks[m], cfg.sensor.r_sense)
                    if truth is None:
                        continue
                    est = range_only_observe(state, self.mean[m], np.inf)
                except TargetAtSensor:
                    continue
                z = truth.h + self.noise_rng.normal(0.0, np.sqrt(truth.V[0, 0]), 1)
                b = ekf_update(GaussianBelief(self.mean[m], self.cov[m]), z, est.h, est.H, truth.V)
                self.mean[m], self.cov[m] = b.mean, b.cov
                observed[m] = True
        self.k[observed] = 0
        self._observed = observed

    def record(self, t: int, attacked: frozenset, plan_seconds: float) -> TrialRecord:
        err = np.linalg.norm(self.mean - self.landmarks, axis=1)
        ent = gaussian_entropy(self.cov)
        return TrialRecord(
            t,
            tuple(sorted(attacked)),
            plan_seconds,
            tuple(map(float, err)),
            tuple(map(float, ent)),
            observed=tuple(map(bool, self._observed)),
        )
