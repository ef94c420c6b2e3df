"""Team objectives over (robot, candidate plan) elements.

An element ``(robot, c)`` stands for robot ``robot`` following candidate plan
``c`` from its library. Objectives accept any multiset of elements, so the same
robot may appear with two plans; that is how the bound checks build extended
ground sets. Planners only ever query one element per robot.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from rainplan.errors import SearchSpaceTooLarge
from rainplan.estimation.gaussian import InfoRollout
from rainplan.setfn import SetObjective
from rainplan.world import ControlInput

Element = tuple  # (robot id, candidate index)

MAX_SINGLE_CANDIDATES = 10**7


class TeamObjective(Protocol):
    robots: list[int]

    def num_candidates(self, robot: int) -> int: ...

    def value(self, elements: Sequence[Element]) -> float: ...


def best_response(obj, robot: int, fixed: Sequence[Element] = ()) -> tuple[int, float]:
    """Best candidate for ``robot`` given ``fixed`` elements; ties go to the lowest index."""
    count = obj.num_candidates(robot)
    if count > MAX_SINGLE_CANDIDATES:
        raise SearchSpaceTooLarge(f"{count} candidates > {MAX_SINGLE_CANDIDATES}")
    fast = getattr(obj, "best_response", None)
    if fast is not None:
        return fast(robot, tuple(fixed))
    fixed = list(fixed)
    vals = [obj.value(fixed + [(robot, c)]) for c in range(count)]
    idx = int(np.argmax(vals))
    return idx, float(vals[idx])


def assignment_elements(assignment: dict) -> list[Element]:
    return [(r, assignment[r]) for r in sorted(assignment)]


def induced_set_objective(obj, assignment: dict) -> SetObjective:
    """Set function over robots ``S -> J(plans of S)`` for a fixed assignment."""
    robots = sorted(assignment)
    return SetObjective(robots, lambda s: obj.value([(r, assignment[r]) for r in s]),
                        submodular=getattr(obj, "submodular", False))


def element_set_objective(obj, elements: Sequence[Element]) -> SetObjective:
    """Set function over an explicit list of elements."""
    return SetObjective(list(elements), lambda s: obj.value(list(s)),
                        submodular=getattr(obj, "submodular", False))


class AssignmentEvaluator:
    """Adapter from a team objective to ``robust_value_oracle``'s evaluator."""

    def __init__(self, obj):
        self.obj = obj
        if hasattr(obj, "value_grid"):
            self.value_grid = obj.value_grid

    def __call__(self, assignment: dict) -> float:
        return self.obj.value(assignment_elements(assignment))


# motion primitive libraries -------------------------------------------------


@dataclass(frozen=True)
class PrimitiveLibrary:
    """Piecewise-constant control sequences, enumerated lexicographically.

    Candidate ``c`` has base-``|U|`` digits ``(d_0, ..., d_{S-1})`` with
    ``d_0`` most significant; segment ``s`` holds control ``U[d_s]`` for
    ``segments[s]`` steps.
    """

    controls: np.ndarray  # (|U|, 2)
    segments: tuple[int, ...]

    @property
    def branching(self) -> int:
        return self.controls.shape[0]

    @property
    def horizon(self) -> int:
        return int(sum(self.segments))

    def __len__(self) -> int:
        return self.branching ** len(self.segments)

    def digits(self) -> np.ndarray:
        return np.array(list(itertools.product(range(self.branching), repeat=len(self.segments))), dtype=np.int64)

    def sequences(self) -> np.ndarray:
        """All candidates as a ``(C, T, 2)`` array."""
        steps = np.repeat(np.arange(len(self.segments)), self.segments)
        return self.controls[self.digits()[:, steps]]

    def sequence(self, c: int) -> tuple:
        return tuple(ControlInput(float(v), float(w)) for v, w in self.sequences()[c])


def primitive_segments(horizon: int, num_segments: int) -> tuple[int, ...]:
    """Split ``horizon`` steps into near-equal segments, longer ones first."""
    num_segments = max(1, min(num_segments, horizon))
    base, extra = divmod(horizon, num_segments)
    return tuple(base + (1 if s < extra else 0) for s in range(num_segments))


class GaussianTeamObjective:
    """Log-det reduction objective with per-candidate information increments.

    ``infos[r]`` is ``(C, T, M, o, o)`` and ``seens[r]`` ``(C, T, M)``. When
    ``trees[r]`` is given as ``(branching, segments)`` and the increments of a
    candidate on segment ``s`` only depend on its first ``s + 1`` digits, the
    best response shares prefix computation across the search tree.
    """

    submodular = False

    def __init__(self, rollout: InfoRollout, infos: dict, seens: dict, trees: dict | None = None,
                 sequences: dict | None = None):
        self.rollout = rollout
        self.infos = infos
        self.seens = seens
        self.trees = trees or {}
        self.sequences = sequences or {}
        self.robots = sorted(infos)

    def num_candidates(self, robot: int) -> int:
        return self.infos[robot].shape[0]

    def _context(self, elements):
        info = np.zeros(self.infos[self.robots[0]].shape[1:])
        seen = np.zeros(self.seens[self.robots[0]].shape[1:], dtype=bool)
        for r, c in elements:
            info = info + self.infos[r][c]
            seen = seen | self.seens[r][c]
        return info, seen

    def value(self, elements) -> float:
        elements = list(elements)
        if not elements:
            return 0.0
        info, seen = self._context(elements)
        return self.rollout.value(info, seen)

    def best_response(self, robot: int, fixed) -> tuple[int, float]:
        ctx_info, ctx_seen = self._context(fixed)
        infos, seens = self.infos[robot], self.seens[robot]
        branching, segments = self.trees.get(robot, (infos.shape[0], (self.rollout.horizon,)))
        roll = self.rollout
        state = roll.initial_state(1)
        t = 0
        depth = len(segments)
        for level, length in enumerate(segments):
            nodes = branching ** (level + 1)
            rep = np.arange(nodes) * branching ** (depth - 1 - level)
            state.cov = np.repeat(state.cov, branching, axis=0)
            state.k = np.repeat(state.k, branching, axis=0)
            state.score = np.repeat(state.score, branching, axis=0)
            info = infos[rep, t:t + length] + ctx_info[None, t:t + length]
            seen = seens[rep, t:t + length] | ctx_seen[None, t:t + length]
            state = roll.advance(state, info, seen, t)
            t += length
        values = state.score / roll.horizon
        idx = int(np.argmax(values))
        return idx, float(values[idx])


def joint_search_size(obj, robots: Sequence[int]) -> int:
    return math.prod(obj.num_candidates(r) for r in robots)
