"""Multi-target tracking with range-bearing sensors and double-integrator targets."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from rainplan.errors import TargetAtSensor
from rainplan.estimation.gaussian import GaussianBelief, InfoRollout, ekf_update, gaussian_entropy, symmetrize
from rainplan.planning.objective import GaussianTeamObjective, PrimitiveLibrary, primitive_segments
from rainplan.scenarios.config import STREAM_INIT, STREAM_NOISE, STREAM_TARGETS, ScenarioConfig, substream
from rainplan.scenarios.metrics import TrialRecord
from rainplan.setfn import SetObjective
from rainplan.world import (
    RobotState,
    double_integrator_model,
    range_bearing_info_batch,
    range_bearing_observe,
    reflect_in_box,
    rollout_poses,
    unicycle_step_batch,
)


@dataclass
class TargetModel:
    """Double-integrator target block for :class:`InfoRollout`."""

    F: np.ndarray
    W: np.ndarray
    dim: int = 4
    obs_dim: int = 2
    process: str = "fixed"
    q: float = 0.0


def spread_points(rng: np.random.Generator, count: int, lo, hi, min_sep: float, dims: int = 2,
                  max_tries: int = 10_000) -> np.ndarray:
    """Uniform points in a box with pairwise separation at least ``min_sep``."""
    pts: list[np.ndarray] = []
    for _ in range(max_tries):
        if len(pts) == count:
            break
        p = rng.uniform(lo, hi, dims)
        if all(np.linalg.norm(p - o) >= min_sep for o in pts):
            pts.append(p)
    if len(pts) < count:
        raise ValueError("could not place points with the requested separation")
    return np.array(pts)


class TrackingSim:
    def __init__(self, cfg: ScenarioConfig, seed: int):
        self.cfg = cfg
        self.robots = list(range(cfg.n))
        self.F, self.W = double_integrator_model(cfg.tau, cfg.q)
        self.model = TargetModel(self.F, self.W)
        lo, hi = cfg.bounds
        init = substream(seed, STREAM_INIT)
        xy = spread_points(init, cfg.n, lo, hi, cfg.min_separation)
        self.poses = np.column_stack([xy, init.uniform(-np.pi, np.pi, cfg.n)])
        self.targets = np.zeros((cfg.num_targets, 4))
        self.targets[:, :2] = init.uniform(lo, hi, (cfg.num_targets, 2))
        prior = np.diag([cfg.prior_pos_var] * 2 + [cfg.prior_vel_var] * 2)
        self.cov = np.broadcast_to(prior, (cfg.num_targets, 4, 4)).copy()
        self.mean = self.targets.copy()
        if cfg.prior_sampled:
            self.mean += init.multivariate_normal(np.zeros(4), prior, cfg.num_targets)
        self.target_rng = substream(seed, STREAM_TARGETS)
        self.noise_rng = substream(seed, STREAM_NOISE)
        self.library = PrimitiveLibrary(
            np.asarray(cfg.controls, dtype=float), primitive_segments(cfg.horizon.t_plan, cfg.plan_segments)
        )
        self._sequences = self.library.sequences()
        self.initial_poses = self.poses.copy()
        # Jacobians are taken at the estimate, which may itself lie outside the field of view;
        # the noise model stays at the true geometry because infinite range would zero its growth
        self._linearization = dataclasses.replace(cfg.sensor, r_sense=np.inf, psi=2 * np.pi)

    # planning ------------------------------------------------------------

    def _predicted_means(self, steps: int) -> np.ndarray:
        out = np.empty((steps, self.cfg.num_targets, 2))
        mu = self.mean
        for t in range(steps):
            mu = mu @ self.F.T
            out[t] = mu[:, :2]
        return out

    def _objective(self, sequences: dict, trees: dict | None = None) -> GaussianTeamObjective:
        T = next(iter(sequences.values())).shape[-2]
        means = self._predicted_means(T)
        infos, seens = {}, {}
        for r, seqs in sequences.items():
            poses = rollout_poses(self.poses[r], seqs, self.cfg.tau)
            infos[r], seens[r] = range_bearing_info_batch(poses, means, self.cfg.sensor)
        return GaussianTeamObjective(InfoRollout(self.model, self.cov.copy(), T), infos, seens, trees)

    def planning_objective(self) -> GaussianTeamObjective:
        tree = (self.library.branching, self.library.segments)
        return self._objective({r: self._sequences for r in self.robots}, {r: tree for r in self.robots})

    def plan_controls(self, obj, assignment) -> dict:
        return {r: self._sequences[assignment.plans[r]] for r in self.robots}

    def attack_objective(self, controls: dict, k: int) -> SetObjective:
        obj = self._objective({r: controls[r][None, k:] for r in self.robots})
        return SetObjective(list(self.robots), lambda s: obj.value([(r, 0) for r in s]))

    # execution -----------------------------------------------------------

    def step(self, controls: dict, attacked: frozenset) -> None:
        cfg = self.cfg
        u = np.array([controls[r] for r in self.robots])
        self.poses = unicycle_step_batch(self.poses, u, cfg.tau)
        w = self.target_rng.multivariate_normal(np.zeros(4), self.W, cfg.num_targets) if cfg.q > 0 else 0.0
        self.targets = reflect_in_box(self.targets @ self.F.T + w, *cfg.bounds)
        self.mean = self.mean @ self.F.T
        self.cov = symmetrize(self.F @ self.cov @ self.F.T + self.W)
        for r in self.robots:
            if r in attacked:
                continue
            state = RobotState(*self.poses[r])
            for m in range(cfg.num_targets):
                try:
                    truth = range_bearing_observe(state, self.targets[m, :2], cfg.sensor)
                    if truth is None:
                        continue
                    est = range_bearing_observe(state, self.mean[m, :2], self._linearization)
                except TargetAtSensor:
                    continue
                z = truth.h + self.noise_rng.multivariate_normal(np.zeros(2), truth.V)
                b = ekf_update(GaussianBelief(self.mean[m], self.cov[m]), z, est.h, est.H, truth.V, angle_rows=(1,))
                self.mean[m], self.cov[m] = b.mean, b.cov

    def record(self, t: int, attacked: frozenset, plan_seconds: float) -> TrialRecord:
        err = np.linalg.norm(self.mean[:, :2] - self.targets[:, :2], axis=1)
        ent = gaussian_entropy(self.cov)
        return TrialRecord(t, tuple(sorted(attacked)), plan_seconds, tuple(map(float, err)), tuple(map(float, ent)))
