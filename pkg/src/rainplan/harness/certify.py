"""Empirical certification of the curvature bounds on small synthetic instances.

Each instance is a team objective over ``(robot, plan)`` elements with
``|U|^T`` candidate plans per robot. The submodular family is weighted
coverage plus a positive modular bonus per element; the monotone
non-submodular family adds a convex term ``beta (sum of bonuses)^2``.
Both expose ``value_grid`` so brute-force oracles run vectorized.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from rainplan.planning.objective import AssignmentEvaluator, element_set_objective, induced_set_objective
from rainplan.planning.planners import coordinate_descent, joint_optimum, rtp
from rainplan.setfn import curvature, exact_attack, robust_value_oracle, total_curvature

RATIO_TOL = 1e-9
MAX_ITEMS = 63


def _byte_tables(weights: np.ndarray) -> np.ndarray:
    tables = np.zeros((8, 256))
    bits = (np.arange(256)[:, None] >> np.arange(8)) & 1
    padded = np.zeros(64)
    padded[: len(weights)] = weights
    for b in range(8):
        tables[b] = bits @ padded[8 * b: 8 * b + 8]
    return tables


class CoverageObjective:
    """``J = w(union of covered items) + sum m_e + beta (sum m_e)^2`` over elements."""

    def __init__(self, masks: dict, bonus: dict, weights: np.ndarray, beta: float = 0.0):
        if len(weights) > MAX_ITEMS:
            raise ValueError(f"at most {MAX_ITEMS} items")
        self.masks = {r: np.asarray(m, dtype=np.uint64) for r, m in masks.items()}
        self.bonus = {r: np.asarray(b, dtype=float) for r, b in bonus.items()}
        self.weights = np.asarray(weights, dtype=float)
        self.beta = float(beta)
        self.submodular = self.beta == 0.0
        self.robots = sorted(masks)
        self._tables = _byte_tables(self.weights)

    def num_candidates(self, robot: int) -> int:
        return len(self.masks[robot])

    def _weigh(self, mask: np.ndarray) -> np.ndarray:
        mask = np.asarray(mask, dtype=np.uint64)
        total = np.zeros(mask.shape)
        for b in range(8):
            total += self._tables[b][((mask >> np.uint64(8 * b)) & np.uint64(255)).astype(np.intp)]
        return total

    def value(self, elements) -> float:
        mask = np.uint64(0)
        mod = 0.0
        for r, c in elements:
            mask |= self.masks[r][c]
            mod += self.bonus[r][c]
        return float(self._weigh(mask)) + mod + self.beta * mod * mod

    def value_grid(self, robots, cand_lists) -> np.ndarray:
        k = len(robots)
        mask = np.zeros([1] * k, dtype=np.uint64)
        mod = np.zeros([1] * k)
        for j, (r, cands) in enumerate(zip(robots, cand_lists)):
            shape = [1] * k
            shape[j] = len(cands)
            idx = np.asarray(cands, dtype=np.intp)
            mask = mask | self.masks[r][idx].reshape(shape)
            mod = mod + self.bonus[r][idx].reshape(shape)
        return self._weigh(mask) + mod + self.beta * mod * mod


@dataclass(frozen=True)
class Instance:
    objective: CoverageObjective
    n: int
    num_controls: int
    t_plan: int
    alpha: int
    family: str


def random_instance(rng: np.random.Generator, family: str, max_team: int = 6) -> Instance:
    n = int(rng.integers(2, max_team + 1))
    num_controls = int(rng.integers(2, 4))
    t_plan = int(rng.integers(1, 3))
    alpha = int(rng.integers(1, min(2, n - 1) + 1))
    C = num_controls**t_plan
    items = int(rng.integers(4, 17))
    weights = rng.uniform(0.1, 1.0, items)
    density = rng.uniform(0.15, 0.5)
    masks, bonus = {}, {}
    for r in range(n):
        bits = rng.random((C, items)) < density
        masks[r] = (bits.astype(np.uint64) << np.arange(items, dtype=np.uint64)).sum(axis=1).astype(np.uint64)
        bonus[r] = rng.uniform(0.02, 0.4, C)
    beta = 0.0 if family == "submodular" else float(rng.uniform(0.05, 1.0))
    return Instance(CoverageObjective(masks, bonus, weights, beta), n, num_controls, t_plan, alpha, family)


@dataclass(frozen=True)
class BoundCheck:
    name: str
    ratio: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.ratio >= self.bound - RATIO_TOL


def attacked_value(obj, plans: dict, alpha: int) -> float:
    f = induced_set_objective(obj, plans)
    return f.without(exact_attack(f, alpha).removed)


def _extended_curvature(obj, *assignments) -> float:
    elements = sorted({(r, a[r]) for a in assignments for r in a})
    return total_curvature(element_set_objective(obj, elements))


def certify_instance(inst: Instance) -> list[BoundCheck]:
    obj, alpha = inst.objective, inst.alpha
    plan_lists = {r: list(range(obj.num_candidates(r))) for r in obj.robots}
    q_star = robust_value_oracle(plan_lists, AssignmentEvaluator(obj), alpha)
    exact = rtp(obj, alpha, joint="exact")
    approx = rtp(obj, alpha, joint="cd")
    cd = coordinate_descent(obj)
    opt = joint_optimum(obj)
    rest = [r for r in obj.robots if r not in approx.bait]
    opt_rest = joint_optimum(obj, rest)

    def ratio(plans):
        return attacked_value(obj, plans, alpha) / q_star

    f_exact = induced_set_objective(obj, exact.assignment.plans)
    f_cd = induced_set_objective(obj, approx.assignment.plans)
    cd_ratio = cd.value / opt.value
    checks = []
    if inst.family == "submodular":
        k_exact, k_cd = curvature(f_exact), curvature(f_cd)
        checks.append(BoundCheck("rtp_exact_submodular", ratio(exact.assignment.plans), max(1 - k_exact, 1 / (1 + alpha))))
        checks.append(BoundCheck("rtp_cd_submodular", ratio(approx.assignment.plans),
                                 0.5 * max(1 - k_cd, 1 / (1 + alpha))))
        checks.append(BoundCheck("cd_optimum_submodular", cd_ratio, 0.5))
    else:
        c_exact = total_curvature(f_exact)
        c_cd = max(total_curvature(f_cd), _extended_curvature(obj, approx.assignment.plans, opt_rest.plans))
        c_cd_opt = _extended_curvature(obj, cd.plans, opt.plans)
        checks.append(BoundCheck("rtp_exact_monotone", ratio(exact.assignment.plans), (1 - c_exact) ** 2))
        checks.append(BoundCheck("rtp_cd_monotone", ratio(approx.assignment.plans), 0.5 * (1 - c_cd) ** 3))
        checks.append(BoundCheck("cd_optimum_monotone", cd_ratio, 0.5 * (1 - c_cd_opt)))
    return checks


@dataclass
class CertificationReport:
    checks: dict = field(default_factory=dict)  # name -> list[BoundCheck]
    instances: int = 0
    seconds: float = 0.0

    def add(self, checks):
        self.instances += 1
        for c in checks:
            self.checks.setdefault(c.name, []).append(c)

    def violations(self, name: str | None = None) -> int:
        names = [name] if name else list(self.checks)
        return sum(not c.ok for n in names for c in self.checks.get(n, []))

    @property
    def ok(self) -> bool:
        return self.violations() == 0

    def rows(self):
        for name in sorted(self.checks):
            cs = self.checks[name]
            slack = min(c.ratio - c.bound for c in cs)
            yield name, len(cs), self.violations(name), min(c.ratio for c in cs), slack

    def table(self) -> str:
        lines = ["bound,instances,violations,min_ratio,min_slack,status"]
        for name, count, bad, mr, slack in self.rows():
            lines.append(f"{name},{count},{bad},{mr:.6f},{slack:.6f},{'PASS' if bad == 0 else 'FAIL'}")
        return "\n".join(lines)


def run_certification(instances: int = 200, max_team: int = 6, seed: int = 0) -> CertificationReport:
    """Certify ``instances`` instances of each family."""
    report = CertificationReport()
    start = time.perf_counter()
    for family, stream in (("submodular", 1), ("monotone", 2)):
        rng = np.random.default_rng([seed, stream])
        for _ in range(instances):
            report.add(certify_instance(random_instance(rng, family, max_team)))
    report.seconds = time.perf_counter() - start
    return report
