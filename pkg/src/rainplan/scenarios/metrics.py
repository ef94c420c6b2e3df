"""Per-step trial records and their summary metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from rainplan.errors import EmptyTrace

NAN = float("nan")


@dataclass(frozen=True)
class TrialRecord:
    """Metrics after step ``t``. Fields that do not apply to a scenario are empty or nan."""

    t: int
    attacked: tuple
    plan_seconds: float = 0.0
    target_errors: tuple = ()  # position error norm per target
    target_entropies: tuple = ()  # 0.5 logdet(2 pi e cov) per target
    grid_entropy: float = NAN
    observed: tuple = ()  # per landmark, whether any active robot observed it

    @property
    def rmse(self) -> float:
        if not self.target_errors:
            return NAN
        e = np.asarray(self.target_errors)
        return float(np.sqrt(np.mean(e * e)))

    @property
    def mean_entropy(self) -> float:
        return float(np.mean(self.target_entropies)) if self.target_entropies else NAN


def unobserved_durations(observed: np.ndarray) -> np.ndarray:
    """Gaps between consecutive observations of each landmark.

    ``observed`` is ``(T, M)`` for steps ``1..T``. Every landmark counts as seen
    at step 0 and the end of the task closes the last open gap.
    """
    T, M = observed.shape
    gaps = []
    for m in range(M):
        times = np.concatenate([[0], np.flatnonzero(observed[:, m]) + 1])
        if times[-1] != T:
            times = np.append(times, T)
        gaps.append(np.diff(times))
    return np.concatenate(gaps) if gaps else np.zeros(0)


def compute_metrics(trace) -> dict:
    if not trace:
        raise EmptyTrace("trace has no records")
    rmse = np.array([r.rmse for r in trace])
    ent = np.array([r.mean_entropy for r in trace])
    out = {
        "mean_rmse": float(np.mean(rmse)) if np.isfinite(rmse).all() else NAN,
        "peak_rmse": float(np.max(rmse)) if np.isfinite(rmse).all() else NAN,
        "mean_entropy": float(np.mean(ent)) if np.isfinite(ent).all() else NAN,
        "final_grid_entropy": float(trace[-1].grid_entropy),
        "mean_unobserved_duration": NAN,
    }
    if trace[0].observed:
        obs = np.array([r.observed for r in trace], dtype=bool)
        out["mean_unobserved_duration"] = float(np.mean(unobserved_durations(obs)))
    return out


def total_plan_seconds(trace) -> float:
    return float(math.fsum(r.plan_seconds for r in trace))
