"""The receding-horizon resilient acquisition loop."""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from typing import Protocol

from rainplan.attacks import AttackModel, draw_attack
from rainplan.errors import ConfigInvalid
from rainplan.planning.planners import PlanAssignment, coordinate_descent, rtp
from rainplan.setfn import SetObjective

PLANNERS = ("rain", "nonresilient")


@dataclass(frozen=True)
class HorizonConfig:
    t_task: int
    t_plan: int
    t_replan: int
    alpha: int = 0

    def __post_init__(self):
        if not 1 <= self.t_replan <= self.t_plan <= self.t_task:
            raise ConfigInvalid(
                f"need 1 <= t_replan ({self.t_replan}) <= t_plan ({self.t_plan}) <= t_task ({self.t_task})"
            )
        if self.alpha < 0:
            raise ConfigInvalid("alpha must be non-negative")

    def clamp_alpha(self, n: int) -> int:
        if self.alpha > n:
            warnings.warn(f"alpha={self.alpha} exceeds team size {n}; clamping", stacklevel=2)
            return n
        return self.alpha


class Simulation(Protocol):
    """Scenario state advanced by :func:`run_loop`."""

    robots: list[int]

    def planning_objective(self):
        """Team objective over the next plan window from the current belief."""

    def plan_controls(self, obj, assignment: PlanAssignment) -> dict:
        """Map an assignment to ``{robot: (T, 2) control array}``."""

    def attack_objective(self, controls: dict, k: int) -> SetObjective:
        """Robot-set objective of the remaining plans ``controls[r][k:]``."""

    def step(self, controls: dict, attacked: frozenset) -> None:
        """Apply one control per robot, then fuse measurements of non-attacked robots."""

    def record(self, t: int, attacked: frozenset, plan_seconds: float):
        """Per-step metric row after ``step``."""


def plan_window(obj, planner: str, alpha: int) -> PlanAssignment:
    if planner == "rain":
        return rtp(obj, alpha).assignment
    if planner == "nonresilient":
        return coordinate_descent(obj)
    raise ConfigInvalid(f"unknown planner {planner!r}")


def run_loop(sim: Simulation, horizon: HorizonConfig, attack: AttackModel, planner: str, seed: int) -> list:
    n = len(sim.robots)
    alpha = horizon.clamp_alpha(n)
    attack_alpha = min(attack.alpha, n)
    attack_rng = attack.rng(seed)
    controls: dict = {}
    attacked = frozenset()
    k = 0
    records = []
    for t in range(horizon.t_task):
        plan_seconds = 0.0
        if t % horizon.t_replan == 0:
            start = time.perf_counter()
            obj = sim.planning_objective()
            controls = sim.plan_controls(obj, plan_window(obj, planner, alpha))
            k = 0
            plan_seconds = time.perf_counter() - start
        if attack.cadence == "step" or k == 0:
            if attack.needs_objective and attack_alpha > 0:
                f = sim.attack_objective(controls, k)
            else:
                f = SetObjective(list(sim.robots), lambda s: 0.0)
            attacked = draw_attack(attack, f, attack_rng).removed
        sim.step({r: controls[r][k] for r in sim.robots}, attacked)
        records.append(sim.record(t + 1, attacked, plan_seconds))
        k += 1
    return records


def rain_run(scenario, attack: AttackModel | None = None, seed: int = 0, planner: str = "rain") -> list:
    """Run one trial of ``scenario`` (anything exposing ``horizon``, ``attack``
    and ``make_simulation(seed)``)."""
    attack = scenario.attack if attack is None else attack
    return run_loop(scenario.make_simulation(seed), scenario.horizon, attack, planner, seed)
