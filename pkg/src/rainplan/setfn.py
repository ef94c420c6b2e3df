"""Set functions over robot subsets: curvature, total curvature and removal oracles.

A :class:`SetObjective` wraps a deterministic map from subsets of a ground set
to reals, memoized by subset bitmask. The ground set is usually a list of robot
ids, but any hashable elements work (the bound certification uses
``(robot, plan)`` pairs).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np

from rainplan.errors import (
    CurvatureOutOfRange,
    DegenerateDenominator,
    GroundSetTooLarge,
    MonotoneViolation,
    SearchSpaceTooLarge,
    SingletonZero,
    TooManySubsets,
)

RobotId = int

CURVATURE_SLACK = 1e-9
DENOMINATOR_FLOOR = 1e-12
MAX_TOTAL_CURVATURE_GROUND = 12
MAX_ATTACK_SUBSETS = 10**6
MAX_ORACLE_SPACE = 10**7


class SetObjective:
    """Memoized set function ``f: 2^ground_set -> R``.

    ``fn`` receives a tuple of ground elements in ground-set order.
    """

    def __init__(
        self,
        ground_set: Sequence[Hashable],
        fn: Callable[[tuple], float],
        submodular: bool = False,
    ):
        if len(ground_set) > 64:
            raise ValueError("ground sets are limited to 64 elements")
        if len(set(ground_set)) != len(ground_set):
            raise ValueError("ground set elements must be unique")
        self.ground_set = list(ground_set)
        self.submodular = submodular
        self._fn = fn
        self._bit = {e: 1 << k for k, e in enumerate(self.ground_set)}
        self._cache: dict[int, float] = {}

    def __len__(self) -> int:
        return len(self.ground_set)

    @property
    def full_mask(self) -> int:
        return (1 << len(self.ground_set)) - 1

    def mask_of(self, subset: Iterable[Hashable]) -> int:
        mask = 0
        for e in subset:
            mask |= self._bit[e]
        return mask

    def subset_of(self, mask: int) -> tuple:
        return tuple(e for k, e in enumerate(self.ground_set) if mask >> k & 1)

    def value_mask(self, mask: int) -> float:
        try:
            return self._cache[mask]
        except KeyError:
            val = float(self._fn(self.subset_of(mask)))
            self._cache[mask] = val
            return val

    def evaluate(self, subset: Iterable[Hashable]) -> float:
        return self.value_mask(self.mask_of(subset))

    __call__ = evaluate

    def without(self, removed: Iterable[Hashable]) -> float:
        """Value of the ground set minus ``removed``."""
        return self.value_mask(self.full_mask & ~self.mask_of(removed))


@dataclass(frozen=True)
class CurvatureReport:
    kappa: float
    total_c: float
    ground_size: int


@dataclass(frozen=True)
class AttackSet:
    removed: frozenset
    budget: int

    def __post_init__(self):
        if len(self.removed) > self.budget:
            raise ValueError("attack exceeds its budget")


def _clamp_unit(raw: float, what: str) -> float:
    if raw < -CURVATURE_SLACK or raw > 1 + CURVATURE_SLACK:
        raise CurvatureOutOfRange(f"{what} {raw!r} lies outside [0, 1]")
    return min(max(raw, 0.0), 1.0)


def curvature(f: SetObjective) -> float:
    """Curvature ``1 - min_v [f(V) - f(V-v)] / f(v)`` of a monotone submodular f."""
    if len(f) == 0:
        return 0.0
    full = f.full_mask
    f_full = f.value_mask(full)
    ratios = []
    for k in range(len(f)):
        single = f.value_mask(1 << k)
        if single == 0.0:
            raise SingletonZero(f"f({f.ground_set[k]!r}) = 0")
        gain = f_full - f.value_mask(full & ~(1 << k))
        if gain < -CURVATURE_SLACK * max(1.0, abs(f_full)):
            raise MonotoneViolation(f"f(V) < f(V - {f.ground_set[k]!r})")
        ratios.append(gain / single)
    raw = 1.0 - min(ratios)
    if raw > 1 + CURVATURE_SLACK:
        raise MonotoneViolation(f"curvature {raw!r} > 1 implies a negative marginal")
    return _clamp_unit(raw, "curvature")


def total_curvature(f: SetObjective) -> float:
    """Total curvature over all pairs of context sets ``A, B`` excluding ``v``.

    The minimum over pairs of ``gain(v|A) / gain(v|B)`` is obtained from the
    extreme numerator and the extreme admissible denominator, which equals
    pairwise enumeration but costs ``O(2^n n)``.
    """
    n = len(f)
    if n > MAX_TOTAL_CURVATURE_GROUND:
        raise GroundSetTooLarge(f"|V| = {n} > {MAX_TOTAL_CURVATURE_GROUND}")
    if n == 0:
        return 0.0
    values = np.array([f.value_mask(m) for m in range(1 << n)])
    best: float | None = None
    masks = np.arange(1 << n)
    for k in range(n):
        bit = 1 << k
        ctx = masks[(masks & bit) == 0]
        gains = values[ctx | bit] - values[ctx]
        admissible = gains[gains >= DENOMINATOR_FLOOR]
        if admissible.size == 0:
            continue
        num = gains.min()
        ratio = num / admissible.max() if num >= 0 else num / admissible.min()
        best = ratio if best is None else min(best, ratio)
    if best is None:
        raise DegenerateDenominator("every marginal gain underflows")
    if best < -CURVATURE_SLACK:
        raise MonotoneViolation("negative marginal gain found")
    return _clamp_unit(1.0 - best, "total curvature")


def curvature_report(f: SetObjective) -> CurvatureReport:
    return CurvatureReport(kappa=curvature(f), total_c=total_curvature(f), ground_size=len(f))


def greedy_attack(f: SetObjective, alpha: int) -> AttackSet:
    """Remove ``alpha`` elements one at a time, each minimizing the remaining value."""
    if not 0 <= alpha <= len(f):
        raise ValueError(f"alpha={alpha} outside [0, {len(f)}]")
    remaining = f.full_mask
    removed = []
    for _ in range(alpha):
        best_k, best_val = None, math.inf
        for k in range(len(f)):
            if not remaining >> k & 1:
                continue
            val = f.value_mask(remaining & ~(1 << k))
            if val < best_val:
                best_k, best_val = k, val
        remaining &= ~(1 << best_k)
        removed.append(f.ground_set[best_k])
    return AttackSet(frozenset(removed), alpha)


def exact_attack(f: SetObjective, alpha: int) -> AttackSet:
    """Brute-force minimizer of ``f(V - A)`` over ``|A| <= alpha``."""
    n = len(f)
    if not 0 <= alpha <= n:
        raise ValueError(f"alpha={alpha} outside [0, {n}]")
    count = sum(math.comb(n, k) for k in range(alpha + 1))
    if count > MAX_ATTACK_SUBSETS:
        raise TooManySubsets(f"{count} candidate removals > {MAX_ATTACK_SUBSETS}")
    order = sorted(range(n), key=lambda k: f.ground_set[k])
    best_key, best_val = (), f.value_mask(f.full_mask)
    for size in range(1, alpha + 1):
        for combo in itertools.combinations(order, size):
            mask = f.full_mask
            for k in combo:
                mask &= ~(1 << k)
            val = f.value_mask(mask)
            key = tuple(f.ground_set[k] for k in combo)
            if val < best_val or (val == best_val and key < best_key):
                best_key, best_val = key, val
    return AttackSet(frozenset(best_key), alpha)


def attacked_value(f: SetObjective, attack: AttackSet) -> float:
    return f.without(attack.removed)


def robust_value_oracle(
    team_plans: Mapping[RobotId, Sequence],
    f_of_assignment: Callable[[dict], float],
    alpha: int,
    max_space: int = MAX_ORACLE_SPACE,
) -> float:
    """Exact ``max_plans min_{|A|<=alpha} J(V - A)`` by enumeration.

    ``f_of_assignment`` maps ``{robot: plan}`` (any subset of robots) to a real.
    When it also exposes ``value_grid(robots, plan_lists)`` returning the
    objective over the full product grid, that vectorized path is used.
    """
    robots = sorted(team_plans)
    n = len(robots)
    if not 0 <= alpha <= n:
        raise ValueError(f"alpha={alpha} outside [0, {n}]")
    counts = [len(team_plans[r]) for r in robots]
    space = math.prod(counts) * math.comb(n, alpha)
    if space > max_space:
        raise SearchSpaceTooLarge(f"oracle space {space} > {max_space}")
    grid_fn = getattr(f_of_assignment, "value_grid", None)
    worst = np.full(counts, np.inf)
    for size in range(alpha + 1):
        for removed in itertools.combinations(range(n), size):
            kept = [k for k in range(n) if k not in removed]
            kept_ids = [robots[k] for k in kept]
            lists = [team_plans[r] for r in kept_ids]
            if grid_fn is not None:
                vals = np.asarray(grid_fn(kept_ids, lists), dtype=float)
            else:
                vals = np.empty([len(l) for l in lists])
                for idx in itertools.product(*(range(len(l)) for l in lists)):
                    vals[idx] = f_of_assignment(
                        {r: lists[j][idx[j]] for j, r in enumerate(kept_ids)}
                    )
            shape = [counts[k] if k in kept else 1 for k in range(n)]
            worst = np.minimum(worst, vals.reshape(shape))
    return float(worst.max())
