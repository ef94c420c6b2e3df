"""Single-robot search, coordinate descent, the bait-set planner and a brute-force joint solver."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from rainplan.errors import MonotoneViolation, SearchSpaceTooLarge
from rainplan.planning.objective import Element, best_response, joint_search_size

MAX_JOINT_SPACE = 10**7
MONOTONE_TOL = 1e-9


@dataclass(frozen=True)
class PlanAssignment:
    plans: dict  # robot -> candidate index
    value: float

    def elements(self) -> list[Element]:
        return [(r, self.plans[r]) for r in sorted(self.plans)]


@dataclass(frozen=True)
class RtpResult:
    assignment: PlanAssignment
    bait: frozenset
    singleton_values: dict
    singleton_plans: dict = field(default_factory=dict)


def single_robot_plan(obj, robot: int, fixed: Sequence[Element] = ()) -> tuple[int, float]:
    """Exhaustive best plan of ``robot`` with ``fixed`` plans held as context."""
    return best_response(obj, robot, fixed)


def coordinate_descent(obj, robots: Sequence[int] | None = None, fixed: Sequence[Element] = ()) -> PlanAssignment:
    """Robots plan in id order, each conditioning on every plan fixed before it."""
    robots = sorted(obj.robots if robots is None else robots)
    chosen = list(fixed)
    plans = {}
    prev = obj.value(chosen) if chosen else 0.0
    for r in robots:
        idx, val = single_robot_plan(obj, r, chosen)
        if val < prev - MONOTONE_TOL * max(1.0, abs(prev)):
            raise MonotoneViolation(f"team value fell from {prev!r} to {val!r} adding robot {r}")
        chosen.append((r, idx))
        plans[r] = idx
        prev = val
    value = obj.value([(r, plans[r]) for r in robots]) if robots else 0.0
    return PlanAssignment(plans, value)


def joint_optimum(obj, robots: Sequence[int] | None = None, max_space: int = MAX_JOINT_SPACE) -> PlanAssignment:
    """Brute-force maximizer over the product of candidate libraries.

    Ties are broken towards the lexicographically smallest index tuple.
    """
    robots = sorted(obj.robots if robots is None else robots)
    if not robots:
        return PlanAssignment({}, 0.0)
    size = joint_search_size(obj, robots)
    if size > max_space:
        raise SearchSpaceTooLarge(f"joint space {size} > {max_space}")
    grid_fn = getattr(obj, "value_grid", None)
    ranges = [range(obj.num_candidates(r)) for r in robots]
    if grid_fn is not None:
        vals = np.asarray(grid_fn(robots, [list(rg) for rg in ranges]))
        flat = int(np.argmax(vals))
        best = np.unravel_index(flat, vals.shape)
        best_val = float(vals.reshape(-1)[flat])
    else:
        best, best_val = None, -np.inf
        for combo in itertools.product(*ranges):
            val = obj.value(list(zip(robots, combo)))
            if val > best_val:
                best, best_val = combo, val
    return PlanAssignment({r: int(c) for r, c in zip(robots, best)}, best_val)


def rtp(obj, alpha: int, joint: str = "cd") -> RtpResult:
    """Bait-set robust planner.

    Every robot's singleton value is its best stand-alone plan. The ``alpha``
    robots with the largest singleton values (lowest id on ties) form the
    bait set and keep their stand-alone plans; the rest plan jointly as if the
    bait robots did not exist, by coordinate descent (``joint="cd"``) or by
    brute force (``joint="exact"``).
    """
    robots = sorted(obj.robots)
    if not 0 <= alpha <= len(robots):
        raise ValueError(f"alpha={alpha} outside [0, {len(robots)}]")
    singles = {r: single_robot_plan(obj, r) for r in robots}
    values = {r: v for r, (_, v) in singles.items()}
    order = sorted(robots, key=lambda r: (-values[r], r))
    bait = order[:alpha]
    rest = [r for r in robots if r not in bait]
    if joint == "cd":
        step2 = coordinate_descent(obj, rest)
    elif joint == "exact":
        step2 = joint_optimum(obj, rest)
    else:
        raise ValueError(f"unknown joint solver {joint!r}")
    plans = {r: singles[r][0] for r in bait}
    plans.update(step2.plans)
    value = obj.value([(r, plans[r]) for r in robots]) if robots else 0.0
    return RtpResult(
        PlanAssignment(plans, value),
        frozenset(bait),
        values,
        {r: i for r, (i, _) in singles.items()},
    )
