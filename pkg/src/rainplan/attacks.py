"""Attack models choosing which robots lose their measurements."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rainplan.setfn import AttackSet, SetObjective, exact_attack, greedy_attack

ATTACK_KINDS = ("none", "random", "worst_greedy", "worst_exact")
CADENCES = ("step", "window")
ATTACK_STREAM = 2


@dataclass(frozen=True)
class AttackModel:
    """``cadence="step"`` redraws every step, ``"window"`` once per plan window."""

    kind: str = "worst_greedy"
    alpha: int = 1
    cadence: str = "step"
    stream: int = ATTACK_STREAM

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if self.cadence not in CADENCES:
            raise ValueError(f"unknown attack cadence {self.cadence!r}")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")

    @property
    def needs_objective(self) -> bool:
        return self.kind in ("worst_greedy", "worst_exact")

    def rng(self, seed: int) -> np.random.Generator:
        return np.random.default_rng([seed, self.stream])


def draw_attack(model: AttackModel, objective: SetObjective, rng: np.random.Generator | None = None) -> AttackSet:
    alpha = min(model.alpha, len(objective))
    if model.kind == "none" or alpha == 0:
        return AttackSet(frozenset(), model.alpha)
    if model.kind == "random":
        if rng is None:
            raise ValueError("random attacks need a random stream")
        picks = rng.choice(len(objective), size=alpha, replace=False)
        return AttackSet(frozenset(objective.ground_set[k] for k in picks), model.alpha)
    if model.kind == "worst_greedy":
        att = greedy_attack(objective, alpha)
    else:
        att = exact_attack(objective, alpha)
    return AttackSet(att.removed, model.alpha)
