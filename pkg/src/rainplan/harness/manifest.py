"""Run manifests: which scenario, planners, attacks, sweep points and seeds to execute.

A manifest is a JSON object with these fields (defaults in brackets):

``schema_version`` [1]
    Must equal :data:`SCHEMA_VERSION`.
``name`` ["run"]
    Free-form label.
``scenario``
    One of ``tracking``, ``occupancy``, ``surveillance``.
``params`` [{}]
    Keyword arguments of the scenario builder (``n``, ``num_targets``, ``map_kind`` ...).
``overrides`` [{}]
    Config overrides applied after building, e.g. ``{"t_task": 50}``.
``sweep`` [{}]
    Override key to list of values; every combination is one sweep point.
``planners`` [["rain", "nonresilient"]]
``attacks`` [[{"kind": "worst_greedy"}]]
    Attack models; ``cadence`` defaults to the scenario's, the budget is the scenario's alpha.
``seeds`` [10]
    Either a count (seeds ``0..N-1``) or an explicit list of distinct integers.
``paper_scale`` [false], ``traces`` [false], ``jobs`` [1], ``out_dir`` ["results"]
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from rainplan.attacks import ATTACK_KINDS, CADENCES, AttackModel
from rainplan.errors import ConfigInvalid
from rainplan.planning.rain import PLANNERS
from rainplan.scenarios.config import SCENARIO_KINDS, ScenarioConfig, build

SCHEMA_VERSION = 1

_FIELDS = {
    "schema_version", "name", "scenario", "params", "overrides", "sweep", "planners", "attacks", "seeds",
    "paper_scale", "traces", "jobs", "out_dir",
}


@dataclass(frozen=True)
class Cell:
    """One trial: a sweep point, an attack model, a planner and a seed."""

    index: int
    sweep: tuple  # ((key, value), ...)
    attack: dict
    planner: str
    seed: int

    @property
    def sweep_tag(self) -> str:
        return ";".join(f"{k}={v}" for k, v in self.sweep) or "-"

    @property
    def cell_id(self) -> str:
        tag = "_".join(f"{k}{v}" for k, v in self.sweep)
        parts = [p for p in (tag, self.attack["kind"], self.planner, f"s{self.seed}") if p]
        return "_".join(parts).replace("/", "-").replace(" ", "")


@dataclass(frozen=True)
class RunManifest:
    scenario: str
    name: str = "run"
    params: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    planners: tuple = PLANNERS
    attacks: tuple = ({"kind": "worst_greedy"},)
    seeds: tuple = tuple(range(10))
    paper_scale: bool = False
    traces: bool = False
    jobs: int = 1
    out_dir: str = "results"
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigInvalid(f"unsupported schema_version {self.schema_version}")
        if self.scenario not in SCENARIO_KINDS:
            raise ConfigInvalid(f"unknown scenario {self.scenario!r}")
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise ConfigInvalid("seeds must be non-empty and distinct")
        if not all(isinstance(s, int) and s >= 0 for s in self.seeds):
            raise ConfigInvalid("seeds must be non-negative integers")
        if not self.planners or any(p not in PLANNERS for p in self.planners):
            raise ConfigInvalid(f"planners must be drawn from {PLANNERS}")
        if not self.attacks:
            raise ConfigInvalid("need at least one attack model")
        for att in self.attacks:
            if set(att) - {"kind", "cadence"} or att.get("kind") not in ATTACK_KINDS:
                raise ConfigInvalid(f"bad attack entry {att!r}")
            if att.get("cadence", "step") not in CADENCES:
                raise ConfigInvalid(f"bad attack cadence in {att!r}")
        for key, values in self.sweep.items():
            if not isinstance(values, (list, tuple)) or not values:
                raise ConfigInvalid(f"sweep {key!r} needs a non-empty list of values")
        if self.jobs < 1:
            raise ConfigInvalid("jobs must be at least 1")
        for point in self.sweep_points():
            self.config(point)  # surface invalid combinations before any trial runs

    def sweep_points(self) -> list[tuple]:
        keys = sorted(self.sweep)
        return [tuple(zip(keys, vals)) for vals in itertools.product(*(self.sweep[k] for k in keys))]

    def config(self, point: tuple = ()) -> ScenarioConfig:
        return build(self.scenario, self.params, {**self.overrides, **dict(point)}, self.paper_scale)

    def attack_model(self, cfg: ScenarioConfig, attack: dict) -> AttackModel:
        return AttackModel(attack["kind"], cfg.alpha, attack.get("cadence", cfg.attack.cadence))

    def cells(self) -> list[Cell]:
        out = []
        combos = itertools.product(self.sweep_points(), self.attacks, sorted(self.seeds), self.planners)
        for i, (point, att, seed, planner) in enumerate(combos):
            out.append(Cell(i, point, dict(att), planner, seed))
        return out

    def with_cli(self, seeds: int | None = None, paper_scale: bool | None = None, traces: bool | None = None,
                 jobs: int | None = None, out_dir: str | None = None) -> "RunManifest":
        """Apply command-line flags, which take precedence over file fields."""
        changes = {}
        if seeds is not None:
            changes["seeds"] = tuple(range(seeds))
        if paper_scale:
            changes["paper_scale"] = True
        if traces:
            changes["traces"] = True
        if jobs is not None:
            changes["jobs"] = jobs
        if out_dir is not None:
            changes["out_dir"] = str(out_dir)
        return replace(self, **changes) if changes else self

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "name": self.name,
            "scenario": self.scenario,
            "params": self.params,
            "overrides": self.overrides,
            "sweep": {k: list(v) for k, v in self.sweep.items()},
            "planners": list(self.planners),
            "attacks": [dict(a) for a in self.attacks],
            "seeds": list(self.seeds),
            "paper_scale": self.paper_scale,
            "traces": self.traces,
            "jobs": self.jobs,
            "out_dir": self.out_dir,
        }


def manifest_from_dict(data: dict) -> RunManifest:
    unknown = set(data) - _FIELDS
    if unknown:
        raise ConfigInvalid(f"unknown manifest fields {sorted(unknown)}")
    if "scenario" not in data:
        raise ConfigInvalid("manifest needs a scenario")
    kw = dict(data)
    seeds = kw.get("seeds", 10)
    if isinstance(seeds, int) and not isinstance(seeds, bool):
        if seeds < 1:
            raise ConfigInvalid("seed count must be positive")
        kw["seeds"] = tuple(range(seeds))
    elif isinstance(seeds, list):
        kw["seeds"] = tuple(seeds)
    else:
        raise ConfigInvalid("seeds must be a count or a list")
    for key in ("planners", "attacks"):
        if key in kw:
            if not isinstance(kw[key], list):
                raise ConfigInvalid(f"{key} must be a list")
            kw[key] = tuple(kw[key])
    for key in ("params", "overrides", "sweep"):
        if not isinstance(kw.get(key, {}), dict):
            raise ConfigInvalid(f"{key} must be an object")
    try:
        return RunManifest(**kw)
    except TypeError as exc:
        raise ConfigInvalid(str(exc)) from exc


def load_manifest(path: str | Path) -> RunManifest:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigInvalid("manifest must be a JSON object")
    return manifest_from_dict(data)
