"""Declarative scenario descriptions and their builders."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from rainplan.attacks import AttackModel
from rainplan.errors import ConfigInvalid
from rainplan.planning.rain import HorizonConfig
from rainplan.world import BeamSensorConfig, SensorConfig

SCENARIO_KINDS = ("tracking", "occupancy", "surveillance")
MAP_KINDS = ("squares", "corridor")

# named random substreams of one trial seed
STREAM_TARGETS = 1
STREAM_ATTACKS = 2
STREAM_NOISE = 3
STREAM_INIT = 4

TRACKING_CONTROLS = tuple((v, w) for v in (1.0, 3.0) for w in (0.0, 1.0, -1.0, 3.0, -3.0))
OCCUPANCY_CONTROLS = tuple((v, w) for v in (0.0, 1.0, 2.0) for w in (0.0, 1.0, -1.0, 2.0, -2.0))
SURVEILLANCE_CONTROLS = tuple((v, w) for v in (1.0, 3.0) for w in (0.0, 1.0, 2.0))


def substream(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    n: int
    num_targets: int
    horizon: HorizonConfig
    controls: tuple
    tau: float
    plan_segments: int
    attack: AttackModel
    bounds: tuple = (0.0, 64.0)
    q: float = 0.0
    sensor: SensorConfig | None = None
    beam: BeamSensorConfig | None = None
    map_kind: str | None = None
    altitude: float = 0.0
    prior_pos_var: float = 1.0
    prior_vel_var: float = 0.01
    prior_sampled: bool = False  # draw the prior mean around the truth instead of at it
    min_separation: float = 2.0
    csqmi_mode: str = "window"
    occupied_threshold: float = 0.65
    landmarks: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ConfigInvalid(f"unknown scenario kind {self.kind!r}")
        if self.n < 1 or self.num_targets < 1:
            raise ConfigInvalid("need at least one robot and one target")
        if not self.controls or not np.all(np.isfinite(np.asarray(self.controls, dtype=float))):
            raise ConfigInvalid("control set must be non-empty and finite")
        if self.tau <= 0 or self.plan_segments < 1:
            raise ConfigInvalid("tau must be positive and plan_segments at least 1")
        if self.horizon.alpha > self.n:
            raise ConfigInvalid(f"alpha={self.horizon.alpha} exceeds team size {self.n}")
        if self.kind == "occupancy" and self.map_kind not in MAP_KINDS:
            raise ConfigInvalid(f"unknown map {self.map_kind!r}")
        if self.csqmi_mode not in ("window", "step", "prune"):
            raise ConfigInvalid(f"unknown csqmi mode {self.csqmi_mode!r}")

    @property
    def alpha(self) -> int:
        return self.horizon.alpha

    def make_simulation(self, seed: int):
        if self.kind == "tracking":
            from rainplan.scenarios.tracking import TrackingSim

            return TrackingSim(self, seed)
        if self.kind == "occupancy":
            from rainplan.scenarios.occupancy import OccupancySim

            return OccupancySim(self, seed)
        from rainplan.scenarios.surveillance import SurveillanceSim

        return SurveillanceSim(self, seed)

    def with_overrides(self, overrides: dict) -> "ScenarioConfig":
        return apply_overrides(self, overrides)

    def describe(self) -> dict:
        """Flat JSON-friendly summary (for traces and manifests)."""
        h = self.horizon
        return {
            "kind": self.kind,
            "n": self.n,
            "num_targets": self.num_targets,
            "t_task": h.t_task,
            "t_plan": h.t_plan,
            "t_replan": h.t_replan,
            "alpha": h.alpha,
            "tau": self.tau,
            "plan_segments": self.plan_segments,
            "attack_kind": self.attack.kind,
            "attack_cadence": self.attack.cadence,
            "map_kind": self.map_kind or "",
        }


_HORIZON_KEYS = {"t_task", "t_plan", "t_replan", "alpha"}
_ATTACK_KEYS = {"attack_kind": "kind", "attack_cadence": "cadence"}


def apply_overrides(cfg: ScenarioConfig, overrides: dict) -> ScenarioConfig:
    overrides = dict(overrides or {})
    names = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = set(overrides) - names - _HORIZON_KEYS - set(_ATTACK_KEYS)
    if unknown:
        raise ConfigInvalid(f"unknown override keys {sorted(unknown)}")
    h = cfg.horizon
    hz = {k: overrides.pop(k) for k in list(overrides) if k in _HORIZON_KEYS}
    if "t_plan" in hz and "t_replan" not in hz and h.t_replan == h.t_plan:
        hz["t_replan"] = min(hz["t_plan"], hz.get("t_task", h.t_task))
    try:
        horizon = dataclasses.replace(h, **hz)
    except TypeError as exc:
        raise ConfigInvalid(str(exc)) from exc
    att = {_ATTACK_KEYS[k]: overrides.pop(k) for k in list(overrides) if k in _ATTACK_KEYS}
    attack = dataclasses.replace(cfg.attack, alpha=horizon.alpha, **att)
    for key in ("sensor", "beam"):
        if isinstance(overrides.get(key), dict):
            base = getattr(cfg, key)
            overrides[key] = dataclasses.replace(base, **overrides[key])
    if "controls" in overrides:
        overrides["controls"] = tuple(tuple(map(float, u)) for u in overrides["controls"])
    if "bounds" in overrides:
        overrides["bounds"] = tuple(map(float, overrides["bounds"]))
    try:
        return dataclasses.replace(cfg, horizon=horizon, attack=attack, **overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(str(exc)) from exc


def build_tracking(n: int = 5, num_targets: int = 10, alpha: int = 1, overrides: dict | None = None,
                   paper_scale: bool = False) -> ScenarioConfig:
    cfg = ScenarioConfig(
        kind="tracking",
        n=n,
        num_targets=num_targets,
        horizon=_horizon(500 if paper_scale else 100, 25, 25, alpha, n),
        controls=TRACKING_CONTROLS,
        tau=0.5,
        plan_segments=3,
        attack=AttackModel("worst_greedy", alpha, "step"),
        bounds=(0.0, 64.0),
        q=0.001,
        sensor=SensorConfig(r_sense=10.0, psi=np.deg2rad(94.0), sigma_r=0.15, sigma_b=np.deg2rad(5.0)),
    )
    return apply_overrides(cfg, overrides or {})


def build_occupancy(map_kind: str = "squares", alpha: int = 2, overrides: dict | None = None,
                    paper_scale: bool = False) -> ScenarioConfig:
    if map_kind not in MAP_KINDS:
        raise ConfigInvalid(f"unknown map {map_kind!r}")
    t_task = 50 if map_kind == "squares" else 100
    cfg = ScenarioConfig(
        kind="occupancy",
        n=6,
        num_targets=1,
        horizon=_horizon(t_task, 4, 4, alpha, 6),
        controls=OCCUPANCY_CONTROLS,
        tau=1.0,
        plan_segments=4 if paper_scale else 2,
        attack=AttackModel("worst_greedy", alpha, "window"),
        bounds=(0.0, 20.0),
        beam=BeamSensorConfig(num_beams=16, z_min=0.1, z_max=1.5, sigma=0.01),
        map_kind=map_kind,
    )
    return apply_overrides(cfg, overrides or {})


def build_surveillance(n: int = 5, num_landmarks: int = 10, alpha: int = 2, overrides: dict | None = None,
                       paper_scale: bool = False) -> ScenarioConfig:
    from rainplan.scenarios.data import load_landmarks

    lms = load_landmarks()
    if not 1 <= num_landmarks <= len(lms):
        raise ConfigInvalid(f"num_landmarks must lie in [1, {len(lms)}]")
    cfg = ScenarioConfig(
        kind="surveillance",
        n=n,
        num_targets=num_landmarks,
        horizon=_horizon(300, 10, 10, alpha, n),
        controls=SURVEILLANCE_CONTROLS,
        tau=1.0,
        plan_segments=3,
        attack=AttackModel("worst_greedy", alpha, "step"),
        bounds=(0.0, 60.0),
        q=0.01,
        sensor=SensorConfig(r_sense=10.0, psi=2 * np.pi, sigma_r=0.1, sigma_b=1.0),
        altitude=6.0,
        landmarks=tuple(tuple(row) for row in lms[:num_landmarks]),
    )
    return apply_overrides(cfg, overrides or {})


def _horizon(t_task, t_plan, t_replan, alpha, n) -> HorizonConfig:
    if alpha > n:
        raise ConfigInvalid(f"alpha={alpha} exceeds team size {n}")
    return HorizonConfig(t_task, t_plan, t_replan, alpha)


def build(kind: str, params: dict | None = None, overrides: dict | None = None, paper_scale: bool = False):
    params = dict(params or {})
    builders = {"tracking": build_tracking, "occupancy": build_occupancy, "surveillance": build_surveillance}
    if kind not in builders:
        raise ConfigInvalid(f"unknown scenario kind {kind!r}")
    try:
        return builders[kind](**params, overrides=overrides, paper_scale=paper_scale)
    except TypeError as exc:
        raise ConfigInvalid(str(exc)) from exc
