"""Acceptance suite: one test per criterion, each recording a PASS/FAIL verdict.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines appear in the
terminal summary under "acceptance criteria" (and inline with ``-s``).
The scenario trend criteria take several minutes each on one core.
"""
from __future__ import annotations

import time

import numpy as np
import pytest
from scipy.integrate import quad

from rainplan.attacks import AttackModel
from rainplan.estimation.gaussian import GaussianBelief, kf_update_covariance
from rainplan.harness.certify import random_instance, run_certification
from rainplan.harness.manifest import manifest_from_dict
from rainplan.harness.runner import run
from rainplan.planning.planners import coordinate_descent, rtp
from rainplan.planning.rain import rain_run
from rainplan.scenarios import build_occupancy, build_surveillance, build_tracking, compute_metrics
from rainplan.setfn import SetObjective, curvature, total_curvature
from rainplan.world import (
    BeamSensorConfig,
    RobotState,
    SensorConfig,
    beam_likelihood,
    range_bearing_h,
    range_bearing_observe,
    range_only_observe,
)

SEEDS = range(10)
TREND_BUDGET = 300.0  # seconds allowed per trend criterion


@pytest.fixture(scope="module")
def certification():
    return run_certification(instances=200, max_team=6, seed=0)


def _bound_detail(report, names):
    parts = []
    for name, count, bad, _, slack in report.rows():
        if name in names:
            parts.append(f"{name} {count} checks {bad} violations min slack {slack:.3g}")
    return "; ".join(parts)


def test_criterion_01_submodular_bound(certification, verdicts):
    rep = certification
    names = {"rtp_exact_submodular"}
    ok = rep.violations("rtp_exact_submodular") == 0 and len(rep.checks["rtp_exact_submodular"]) >= 200
    ok = ok and rep.seconds < 120.0
    assert verdicts.record(1, "submodular curvature bound", ok,
                           f"{_bound_detail(rep, names)}; certification {rep.seconds:.1f}s")


def test_criterion_02_monotone_bound(certification, verdicts):
    rep = certification
    ok = rep.violations("rtp_exact_monotone") == 0 and len(rep.checks["rtp_exact_monotone"]) >= 200
    assert verdicts.record(2, "total curvature bound", ok, _bound_detail(rep, {"rtp_exact_monotone"}))


def test_criterion_03_coordinate_descent_bounds(certification, verdicts):
    rep = certification
    names = {"rtp_cd_submodular", "rtp_cd_monotone", "cd_optimum_submodular", "cd_optimum_monotone"}
    ok = all(rep.violations(n) == 0 and len(rep.checks[n]) >= 200 for n in names)
    assert verdicts.record(3, "coordinate descent bounds", ok, _bound_detail(rep, names))


def test_criterion_04_alpha_zero_equivalence(verdicts):
    rng = np.random.default_rng(404)
    mismatches = 0
    for k in range(50):
        inst = random_instance(rng, "submodular" if k % 2 == 0 else "monotone")
        mismatches += rtp(inst.objective, 0).assignment.plans != coordinate_descent(inst.objective).plans
    assert verdicts.record(4, "alpha=0 equivalence", mismatches == 0, f"{mismatches}/50 assignments differ")


def _coverage(rng, n):
    items = rng.uniform(0.1, 1.0, 12)
    sets = [rng.random(12) < 0.4 for _ in range(n)]

    def fn(s):
        covered = np.logical_or.reduce([sets[i] for i in s]) if s else np.zeros(12, dtype=bool)
        return float(items[covered].sum())

    return SetObjective(list(range(n)), fn, submodular=True)


def test_criterion_05_curvature_sanity(verdicts):
    rng = np.random.default_rng(505)
    worst_modular, worst_gap = 0.0, 0.0
    for _ in range(100):
        n = int(rng.integers(2, 7))
        w = rng.uniform(0.1, 2.0, n)
        f = SetObjective(list(range(n)), lambda s, w=w: float(sum(w[i] for i in s)), submodular=True)
        worst_modular = max(worst_modular, abs(curvature(f)), abs(total_curvature(f)))
        g = _coverage(rng, n)
        worst_gap = max(worst_gap, abs(curvature(g) - total_curvature(g)))
    ok = worst_modular <= 1e-12 and worst_gap <= 1e-9
    assert verdicts.record(5, "curvature sanity", ok,
                           f"modular max |kappa|,|c| {worst_modular:.2e}; submodular max |kappa-c| {worst_gap:.2e}")


def _trial(cfg, planner, seed, attack=None):
    return compute_metrics(rain_run(cfg, attack=attack, seed=seed, planner=planner))


@pytest.mark.parametrize("alpha", [1, 2])
def test_criterion_06_tracking_trend(alpha, verdicts):
    cfg = build_tracking(5, 10, alpha)
    assert cfg.horizon.t_task == 100 and cfg.attack.kind == "worst_greedy"
    start = time.perf_counter()
    rain = [_trial(cfg, "rain", s) for s in SEEDS]
    base = [_trial(cfg, "nonresilient", s) for s in SEEDS]
    seconds = time.perf_counter() - start
    wins = sum(r["mean_rmse"] < b["mean_rmse"] for r, b in zip(rain, base))
    peak_r = np.mean([r["peak_rmse"] for r in rain])
    peak_b = np.mean([b["peak_rmse"] for b in base])
    ok = wins >= 7 and peak_r < peak_b and seconds < TREND_BUDGET
    detail = (f"alpha={alpha} mean RMSE wins {wins}/10, mean peak RMSE RAIN {peak_r:.3f} vs "
              f"NonResilient {peak_b:.3f}, {seconds:.0f}s")
    assert verdicts.record(6, f"tracking trend alpha={alpha}", ok, detail)


def test_criterion_07_occupancy_trend(verdicts):
    cfg = build_occupancy("squares", 2)
    assert cfg.n == 6 and cfg.attack.kind == "worst_greedy"
    random_attack = AttackModel("random", cfg.alpha, cfg.attack.cadence)
    start = time.perf_counter()
    rain = [_trial(cfg, "rain", s)["final_grid_entropy"] for s in SEEDS]
    base = [_trial(cfg, "nonresilient", s)["final_grid_entropy"] for s in SEEDS]
    rand = [_trial(cfg, "rain", s, random_attack)["final_grid_entropy"] for s in SEEDS]
    seconds = time.perf_counter() - start
    wins = sum(r <= b for r, b in zip(rain, base))
    ok = wins >= 7 and np.mean(rand) <= np.mean(rain) and seconds < TREND_BUDGET
    detail = (f"RAIN <= NonResilient in {wins}/10 seeds; mean final entropy RAIN {np.mean(rain):.2f}, "
              f"NonResilient {np.mean(base):.2f}, RAIN under random {np.mean(rand):.2f}; {seconds:.0f}s")
    assert verdicts.record(7, "occupancy trend", ok, detail)


def test_criterion_08_surveillance_trend(verdicts):
    start = time.perf_counter()
    parts, ok = [], True
    for t_replan in (1, 5, 10):
        cfg = build_surveillance(5, 10, 2, {"t_task": 100, "t_replan": t_replan})
        rain = np.mean([_trial(cfg, "rain", s)["mean_unobserved_duration"] for s in SEEDS])
        base = np.mean([_trial(cfg, "nonresilient", s)["mean_unobserved_duration"] for s in SEEDS])
        ok = ok and rain <= base
        parts.append(f"T_REPLAN={t_replan} RAIN {rain:.3f} vs NonResilient {base:.3f}")
    seconds = time.perf_counter() - start
    ok = ok and seconds < TREND_BUDGET
    assert verdicts.record(8, "surveillance trend", ok, "; ".join(parts) + f"; {seconds:.0f}s")


def _central_diff(fn, x, eps=1e-6):
    cols = []
    for k in range(len(x)):
        e = np.zeros_like(x)
        e[k] = eps
        cols.append((fn(x + e) - fn(x - e)) / (2 * eps))
    return np.stack(cols, axis=-1)


def _jacobian_error(rng) -> float:
    sensor = SensorConfig(r_sense=20, psi=2 * np.pi)
    worst = 0.0
    for _ in range(200):
        pose = rng.uniform(-5, 5, 3)
        y = pose[:2] + rng.uniform(1, 6, 2) * rng.choice([-1, 1], 2)
        obs = range_bearing_observe(RobotState(*pose), y, sensor)
        state = np.concatenate([y, rng.normal(size=2)])
        fd = _central_diff(lambda s: range_bearing_h(pose, s[:2]), state)
        worst = max(worst, np.abs(fd - obs.H).max())
        pos = rng.uniform(-3, 3, 3)
        lm = pos + rng.uniform(0.5, 4, 3) * rng.choice([-1, 1], 3)
        obs = range_only_observe(RobotState(pos[0], pos[1], 0.0, pos[2]), lm, np.inf)
        fd = _central_diff(lambda q: np.array([np.linalg.norm(q - pos)]), lm)
        worst = max(worst, np.abs(fd - obs.H).max())
    return worst


def _kf_violations(rng) -> int:
    bad = 0
    for _ in range(100):
        d, o = int(rng.integers(1, 6)), int(rng.integers(1, 4))
        A = rng.normal(size=(d, d))
        prior = A @ A.T + 0.1 * np.eye(d)
        H = rng.normal(size=(o, d))
        B = rng.normal(size=(o, o))
        V = B @ B.T + 0.05 * np.eye(o)
        post = kf_update_covariance(GaussianBelief(np.zeros(d), prior), H, V).cov
        bad += np.linalg.eigvalsh(prior - post).min() < -1e-10
    return bad


def _monotone_violations(rng, cfg) -> int:
    sim = cfg.make_simulation(0)
    obj = sim.planning_objective()
    robots = list(obj.robots)
    bad = 0
    for _ in range(500):
        plan = {r: int(rng.integers(obj.num_candidates(r))) for r in robots}
        big = [r for r in robots if rng.random() < 0.6]
        small = [r for r in big if rng.random() < 0.5]
        v_big = obj.value([(r, plan[r]) for r in big])
        v_small = obj.value([(r, plan[r]) for r in small])
        bad += v_big < v_small - 1e-9
    return bad


def _quadrature_error() -> float:
    cfg = BeamSensorConfig()
    worst = 0.0
    for d in (0.05, 0.1, 0.55, 1.0, 1.5, 3.0, np.inf):
        mu = 0.0 if d < cfg.z_min else min(d, cfg.z_max)
        val, _ = quad(lambda z: float(beam_likelihood(d, z, cfg)), mu - 1, mu + 1, points=[mu])
        worst = max(worst, abs(val - 1.0))
    return worst


def test_criterion_09_numerical_suite(verdicts):
    rng = np.random.default_rng(909)
    jac = _jacobian_error(rng)
    kf = _kf_violations(rng)
    scenarios = {
        "tracking": build_tracking(5, 10, 1),
        "occupancy": build_occupancy("squares", 2),
        "surveillance": build_surveillance(5, 10, 2),
    }
    mono = {name: _monotone_violations(rng, cfg) for name, cfg in scenarios.items()}
    quad_err = _quadrature_error()
    ok = jac <= 1e-5 and kf == 0 and not any(mono.values()) and quad_err <= 1e-6
    detail = (f"max Jacobian error {jac:.2e}; KF ordering violations {kf}/100; monotonicity violations "
              + ", ".join(f"{k} {v}/500" for k, v in mono.items()) + f"; quadrature error {quad_err:.2e}")
    assert verdicts.record(9, "numerical suite", ok, detail)


def test_criterion_10_determinism(tmp_path, verdicts):
    manifest = manifest_from_dict({
        "scenario": "tracking",
        "params": {"n": 3, "num_targets": 4, "alpha": 1},
        "overrides": {"t_task": 12, "t_plan": 4, "t_replan": 4},
        "attacks": [{"kind": "worst_greedy"}, {"kind": "random"}],
        "seeds": 4,
    })
    outputs = []
    for name, jobs in (("first", 1), ("second", 1), ("parallel", 8)):
        run(manifest, tmp_path / name, jobs=jobs)
        outputs.append((tmp_path / name / "results.csv").read_bytes())
    ok = outputs[0] == outputs[1] == outputs[2]
    detail = f"{len(manifest.cells())} cells; reruns identical {outputs[0] == outputs[1]}, jobs 1 vs 8 identical {outputs[0] == outputs[2]}"
    assert verdicts.record(10, "determinism", ok, detail)
