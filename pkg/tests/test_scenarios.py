from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rainplan.attacks import AttackModel
from rainplan.errors import ConfigInvalid, EmptyTrace
from rainplan.estimation.grid import OccupancyGrid, grid_entropy, read_pgm
from rainplan.planning.rain import rain_run
from rainplan.scenarios import (
    TrialRecord,
    build,
    build_occupancy,
    build_surveillance,
    build_tracking,
    compute_metrics,
    unobserved_durations,
)
from rainplan.scenarios.data import draw_map, load_landmarks, load_map, map_path
from rainplan.scenarios.occupancy import GridTeamObjective
from rainplan.world import landmark_noise


def short(cfg, t_task):
    return cfg.with_overrides({"t_task": t_task})


# builders -----------------------------------------------------------------


class TestBuilders:
    def test_tracking_defaults(self):
        cfg = build_tracking(5, 10, 1, {})
        h = cfg.horizon
        assert (h.t_plan, h.t_replan) == (25, 25)
        assert cfg.tau == 0.5 and cfg.q == 0.001
        s = cfg.sensor
        assert s.r_sense == 10.0 and math.isclose(np.rad2deg(s.psi), 94.0)
        assert s.sigma_r == 0.15 and math.isclose(np.rad2deg(s.sigma_b), 5.0)
        assert cfg.bounds == (0.0, 64.0)
        assert set(cfg.controls) == {(v, w) for v in (1.0, 3.0) for w in (0.0, 1.0, -1.0, 3.0, -3.0)}

    def test_tracking_table_row(self):
        cfg = build_tracking(10, 10, 2, {})
        assert (cfg.n, cfg.num_targets, cfg.alpha) == (10, 10, 2)

    def test_tracking_scale(self):
        assert build_tracking().horizon.t_task == 100
        assert build_tracking(paper_scale=True).horizon.t_task == 500

    def test_override_single_key(self):
        base = build_tracking(5, 10, 1, {})
        cfg = build_tracking(5, 10, 1, {"t_task": 100})
        assert cfg.horizon.t_task == 100
        assert cfg == base.with_overrides({"t_task": 100})
        assert cfg.horizon.t_plan == base.horizon.t_plan and cfg.sensor == base.sensor

    @pytest.mark.parametrize("kind,t_task", [("squares", 50), ("corridor", 100)])
    def test_occupancy_defaults(self, kind, t_task):
        cfg = build_occupancy(kind)
        assert cfg.horizon.t_task == t_task
        assert cfg.n == 6
        assert cfg.beam.z_max == 1.5 and cfg.beam.sigma == 0.01
        assert cfg.horizon.t_plan == 4 and cfg.tau == 1.0
        assert cfg.attack.cadence == "window"
        assert set(cfg.controls) == {(v, w) for v in (0.0, 1.0, 2.0) for w in (0.0, 1.0, -1.0, 2.0, -2.0)}

    def test_surveillance_defaults(self):
        cfg = build_surveillance()
        assert cfg.horizon.t_task == 300 and cfg.horizon.t_plan == 10
        assert cfg.sensor.r_sense == 10.0 and cfg.q == 0.01 and cfg.tau == 1.0
        assert cfg.n == 5
        assert set(cfg.controls) == {(v, w) for v in (1.0, 3.0) for w in (0.0, 1.0, 2.0)}
        assert build_surveillance(paper_scale=True).horizon.t_task == 300

    def test_landmark_noise_example(self):
        assert np.allclose(landmark_noise(5, build_surveillance().q), 0.05 * np.eye(3))

    @pytest.mark.parametrize("kind", ["tracking", "occupancy", "surveillance"])
    def test_pure(self, kind):
        assert build(kind) == build(kind)
        assert build(kind, overrides={"t_task": 30}) == build(kind, overrides={"t_task": 30})

    @pytest.mark.parametrize(
        "call",
        [
            lambda: build("swarm"),
            lambda: build_tracking(3, 5, 4),
            lambda: build_tracking(overrides={"warp": 1}),
            lambda: build_tracking(overrides={"t_replan": 30}),
            lambda: build_occupancy("maze"),
            lambda: build_occupancy(overrides={"csqmi_mode": "exact"}),
            lambda: build_surveillance(num_landmarks=0),
            lambda: build_tracking(overrides={"controls": [(1.0, float("nan"))]}),
            lambda: build("tracking", {"robots": 3}),
        ],
    )
    def test_invalid(self, call):
        with pytest.raises(ConfigInvalid):
            call()

    def test_attack_overrides(self):
        cfg = build_tracking(5, 10, 2, {"attack_kind": "random", "attack_cadence": "window"})
        assert cfg.attack == AttackModel("random", 2, "window")

    def test_t_plan_override_carries_replan(self):
        cfg = build_tracking(overrides={"t_plan": 10})
        assert (cfg.horizon.t_plan, cfg.horizon.t_replan) == (10, 10)

    def test_nested_sensor_override(self):
        cfg = build_tracking(overrides={"sensor": {"r_sense": 5.0}})
        assert cfg.sensor.r_sense == 5.0 and cfg.sensor.sigma_r == 0.15

    def test_describe_is_flat(self):
        d = build_occupancy().describe()
        assert all(isinstance(v, (int, float, str)) for v in d.values())
        assert d["map_kind"] == "squares"


# bundled data -------------------------------------------------------------


class TestData:
    @pytest.mark.parametrize("kind", ["squares", "corridor"])
    def test_maps_match_generator(self, kind):
        assert np.array_equal(load_map(kind), draw_map(kind))
        assert read_pgm(map_path(kind)).shape == (80, 80)

    @pytest.mark.parametrize("kind", ["squares", "corridor"])
    def test_maps_closed(self, kind):
        occ = load_map(kind)
        assert occ[0].all() and occ[-1].all() and occ[:, 0].all() and occ[:, -1].all()
        assert 0.05 < occ.mean() < 0.5

    def test_landmarks(self):
        lms = load_landmarks()
        assert lms.shape == (10, 3)
        assert (lms[:, :2] >= 0).all() and (lms[:, :2] <= 60).all()


# metrics ------------------------------------------------------------------


def brute_gaps(column):
    """Walk the timeline and close a gap at every observation and at the end."""
    gaps, last = [], 0
    for t, seen in enumerate(column, start=1):
        if seen:
            gaps.append(t - last)
            last = t
    if last != len(column):
        gaps.append(len(column) - last)
    return gaps


class TestMetrics:
    def test_perfect_estimates(self):
        trace = [TrialRecord(t, (), target_errors=(0.0, 0.0), target_entropies=(1.0, 1.0)) for t in range(1, 4)]
        m = compute_metrics(trace)
        assert m["mean_rmse"] == 0.0 and m["peak_rmse"] == 0.0 and m["mean_entropy"] == 1.0

    def test_rmse_oracle(self):
        trace = [TrialRecord(1, (), target_errors=(3.0, 4.0)), TrialRecord(2, (), target_errors=(0.0, 0.0))]
        m = compute_metrics(trace)
        assert math.isclose(m["peak_rmse"], math.sqrt(12.5))
        assert math.isclose(m["mean_rmse"], math.sqrt(12.5) / 2)

    def test_uniform_grid_entropy(self):
        assert math.isclose(grid_entropy(OccupancyGrid.uniform(10, 10, 0.25)), 100 * math.log(2))

    def test_every_step_observed(self):
        trace = [TrialRecord(t, (), observed=(True,)) for t in range(1, 11)]
        assert compute_metrics(trace)["mean_unobserved_duration"] == 1.0

    def test_never_observed(self):
        assert unobserved_durations(np.zeros((7, 2), dtype=bool)).tolist() == [7, 7]

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.lists(st.booleans(), min_size=3, max_size=3), min_size=1, max_size=25))
    def test_durations_oracle(self, rows):
        obs = np.array(rows, dtype=bool)
        expect = list(itertools.chain.from_iterable(brute_gaps(obs[:, m]) for m in range(obs.shape[1])))
        got = unobserved_durations(obs)
        assert got.tolist() == expect
        assert got.sum() == obs.shape[0] * obs.shape[1]

    def test_empty_trace(self):
        with pytest.raises(EmptyTrace):
            compute_metrics([])


# grid objective -----------------------------------------------------------


@pytest.fixture(scope="module")
def occupancy_objectives():
    cfg = build_occupancy("squares", 2, {"n": 3})
    sim = cfg.make_simulation(1)
    # map a little first so the objective sees a mix of known and unknown cells
    for _ in range(3):
        sim.step({r: np.array([1.0, 0.5]) for r in sim.robots}, frozenset())
    seqs = sim._sequences[::9]
    base = sim._objective({r: seqs for r in sim.robots})
    return {mode: GridTeamObjective(base.beams, base.valid, base.ncells, mode) for mode in ("window", "step", "prune")}


class TestGridObjective:
    @pytest.mark.parametrize("mode", ["window", "step"])
    def test_best_response_matches_enumeration(self, occupancy_objectives, mode):
        obj = occupancy_objectives[mode]
        fixed = [(0, 3)]
        idx, val = obj.best_response(1, fixed)
        vals = [obj.value(fixed + [(1, c)]) for c in range(obj.num_candidates(1))]
        assert idx == int(np.argmax(vals))
        assert math.isclose(val, max(vals), rel_tol=1e-12)

    @pytest.mark.parametrize("mode", ["window", "step"])
    @settings(max_examples=40, deadline=None)
    @given(data=st.data())
    def test_monotone_submodular(self, occupancy_objectives, mode, data):
        obj = occupancy_objectives[mode]
        C = obj.num_candidates(0)
        pool = [(r, c) for r in obj.robots for c in range(C)]
        picks = data.draw(st.lists(st.sampled_from(pool), min_size=2, max_size=6, unique=True))
        small, extra, e = picks[: len(picks) // 2 - 1], picks[len(picks) // 2 - 1:-1], picks[-1]
        big = small + extra
        gain_small = obj.value(small + [e]) - obj.value(small)
        gain_big = obj.value(big + [e]) - obj.value(big)
        assert obj.value(big) >= obj.value(small) - 1e-12
        assert gain_big >= -1e-12
        assert gain_small >= gain_big - 1e-9

    def test_modes_agree_on_empty(self, occupancy_objectives):
        for obj in occupancy_objectives.values():
            assert obj.value([]) == 0.0

    def test_invalid_candidates_worthless(self, occupancy_objectives):
        obj = occupancy_objectives["window"]
        for r in obj.robots:
            for c in np.flatnonzero(~obj.valid[r]):
                assert obj.value([(r, int(c))]) == 0.0

    def test_unknown_mode(self, occupancy_objectives):
        obj = occupancy_objectives["window"]
        with pytest.raises(ValueError):
            GridTeamObjective(obj.beams, obj.valid, obj.ncells, "sum")


# simulations --------------------------------------------------------------


class TestTracking:
    def test_prior_mean_at_truth(self):
        sim = build_tracking().make_simulation(0)
        assert np.array_equal(sim.mean, sim.targets)
        assert not sim.targets[:, 2:].any()

    def test_sampled_prior(self):
        sim = build_tracking(overrides={"prior_sampled": True}).make_simulation(0)
        assert not np.allclose(sim.mean, sim.targets)

    def test_initial_layout_fixed_per_seed(self):
        a, b = build_tracking().make_simulation(3), build_tracking().make_simulation(3)
        assert np.array_equal(a.poses, b.poses) and np.array_equal(a.targets, b.targets)
        c = build_tracking().make_simulation(4)
        assert not np.array_equal(a.poses, c.poses)
        d = np.linalg.norm(a.poses[:, None, :2] - a.poses[None, :, :2], axis=-1)
        assert d[np.triu_indices(len(d), 1)].min() >= 2.0

    def test_attacked_robots_do_not_measure(self):
        cfg = build_tracking(2, 3, 1)
        sim = cfg.make_simulation(0)
        # park the targets right in front of robot 0
        sim.targets[:, :2] = sim.poses[0, :2] + np.array([[2.0, 0.0]]) @ np.array(
            [[np.cos(sim.poses[0, 2]), np.sin(sim.poses[0, 2])], [-np.sin(sim.poses[0, 2]), np.cos(sim.poses[0, 2])]]
        )
        sim.mean = sim.targets.copy()
        stay = {r: np.array([0.0, 0.0]) for r in sim.robots}
        before = sim.cov.copy()
        sim.step(stay, frozenset({0, 1}))
        grown = sim.cov.copy()
        assert np.allclose(grown, sim.F @ before @ sim.F.T + sim.W)
        sim.cov = before.copy()
        sim.step(stay, frozenset({1}))
        assert np.trace(sim.cov[0]) < np.trace(grown[0])


class TestOccupancy:
    @pytest.mark.parametrize("seed", range(3))
    def test_entropy_never_rises(self, seed):
        cfg = short(build_occupancy("squares"), 12)
        trace = rain_run(cfg, seed=seed)
        assert trace[-1].grid_entropy <= 80 * 80 * math.log(2)
        sim = cfg.make_simulation(seed)
        assert trace[-1].grid_entropy < sim.initial_entropy

    def test_robots_start_in_free_space(self):
        for seed in range(5):
            sim = build_occupancy("corridor").make_simulation(seed)
            rows, cols = sim.grid.cell_of(sim.poses[:, 0], sim.poses[:, 1])
            assert not sim.truth[rows, cols].any()

    def test_collision_keeps_robot_in_place(self):
        sim = build_occupancy("squares", 2, {"n": 2}).make_simulation(0)
        sim.poses[0] = [0.8, 10.0, np.pi]  # facing the west wall
        before = sim.poses[0].copy()
        sim.step({0: np.array([2.0, 0.0]), 1: np.array([0.0, 0.0])}, frozenset())
        assert np.array_equal(sim.poses[0], before)
        assert sim.collisions == 1

    def test_attacked_robot_does_not_map(self):
        sim = build_occupancy("squares", 0, {"n": 1}).make_simulation(0)
        h0 = grid_entropy(sim.grid)
        sim.step({0: np.array([0.0, 0.0])}, frozenset({0}))
        assert grid_entropy(sim.grid) == h0
        sim.step({0: np.array([0.0, 0.0])}, frozenset())
        assert grid_entropy(sim.grid) < h0


class TestSurveillance:
    def test_revisit_counter(self):
        cfg = short(build_surveillance(2, 2, 1), 10)
        sim = cfg.make_simulation(0)
        sim.poses[0, :2] = sim.landmarks[0, :2]  # hover over landmark 0
        sim.poses[1, :2] = [-100.0, -100.0]
        stay = {r: np.array([0.0, 0.0]) for r in sim.robots}
        for k in range(1, 4):
            sim.step(stay, frozenset({0}))
            assert sim.k.tolist() == [k, k]
        sim.step(stay, frozenset())
        assert sim.k.tolist() == [0, 4]
        rec = sim.record(4, frozenset(), 0.0)
        assert rec.observed == (True, False)

    def test_covariance_growth_matches_noise_model(self):
        cfg = build_surveillance(1, 1, 0)
        sim = cfg.make_simulation(0)
        sim.poses[0, :2] = [-100.0, -100.0]
        for _ in range(3):
            sim.step({0: np.array([0.0, 0.0])}, frozenset())
        # unvisited for 3 steps: I + q (1 + 2 + 3) I
        assert np.allclose(sim.cov[0], (1 + 6 * cfg.q) * np.eye(3))

    def test_record_fields(self):
        trace = rain_run(build_surveillance(overrides={"t_task": 3, "t_plan": 3}), seed=0)
        assert len(trace) == 3 and all(len(r.observed) == 10 for r in trace)
        assert np.isfinite(compute_metrics(trace)["mean_unobserved_duration"])


@pytest.mark.parametrize(
    "cfg",
    [
        short(build_tracking(3, 4, 1, {"t_plan": 5}), 6),
        short(build_occupancy("corridor", 2), 6),
        short(build_surveillance(3, 4, 1, {"t_plan": 4}), 6),
    ],
    ids=["tracking", "occupancy", "surveillance"],
)
@pytest.mark.parametrize("planner", ["rain", "nonresilient"])
def test_bit_deterministic(cfg, planner):
    a = rain_run(cfg, seed=11, planner=planner)
    b = rain_run(cfg, seed=11, planner=planner)
    strip = lambda trace: [(r.t, r.attacked, r.target_errors, r.target_entropies, r.grid_entropy, r.observed)
                           for r in trace]
    assert repr(strip(a)) == repr(strip(b))
    assert len(a) == cfg.horizon.t_task
    assert all(len(r.attacked) <= cfg.alpha for r in a)
