"""Gaussian beliefs, Kalman recursions and the batched log-det information rollout."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from rainplan.errors import DimensionMismatch, SingularInnovation
from rainplan.world import wrap_angle

SYM_TOL = 1e-10
COND_LIMIT = 1e14


def symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + np.swapaxes(P, -1, -2))


@dataclass(frozen=True)
class GaussianBelief:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise DimensionMismatch(f"mean {mean.shape} vs cov {cov.shape}")
        if np.abs(cov - cov.T).max(initial=0.0) > SYM_TOL * max(1.0, np.abs(cov).max(initial=0.0)):
            raise ValueError("covariance is not symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


def kf_predict(b: GaussianBelief, F: np.ndarray, W: np.ndarray) -> GaussianBelief:
    F = np.atleast_2d(np.asarray(F, dtype=float))
    W = np.atleast_2d(np.asarray(W, dtype=float))
    d = b.mean.size
    if F.shape != (d, d) or W.shape != (d, d):
        raise DimensionMismatch(f"state dim {d}, F {F.shape}, W {W.shape}")
    return GaussianBelief(F @ b.mean, symmetrize(F @ b.cov @ F.T + W))


def _innovation(cov, H, V):
    H = np.atleast_2d(np.asarray(H, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if H.shape[1] != cov.shape[0] or V.shape != (H.shape[0], H.shape[0]):
        raise DimensionMismatch(f"H {H.shape}, V {V.shape}, cov {cov.shape}")
    S = H @ cov @ H.T + V
    if not np.all(np.isfinite(S)) or np.linalg.cond(S) > COND_LIMIT:
        raise SingularInnovation("innovation covariance is numerically singular")
    return H, V, S


def kf_update_covariance(b: GaussianBelief, H: np.ndarray, V: np.ndarray) -> GaussianBelief:
    """Covariance-only correction in Joseph form; the mean is left untouched."""
    H, V, S = _innovation(b.cov, H, V)
    K = np.linalg.solve(S, H @ b.cov).T
    A = np.eye(b.mean.size) - K @ H
    return GaussianBelief(b.mean, symmetrize(A @ b.cov @ A.T + K @ V @ K.T))


def ekf_update(
    b: GaussianBelief,
    z: np.ndarray,
    z_pred: np.ndarray,
    H: np.ndarray,
    V: np.ndarray,
    angle_rows: tuple[int, ...] = (),
) -> GaussianBelief:
    """Full EKF correction; innovation rows listed in ``angle_rows`` are wrapped."""
    H, V, S = _innovation(b.cov, H, V)
    nu = np.asarray(z, dtype=float) - np.asarray(z_pred, dtype=float)
    for r in angle_rows:
        nu[r] = wrap_angle(nu[r])
    K = np.linalg.solve(S, H @ b.cov).T
    A = np.eye(b.mean.size) - K @ H
    return GaussianBelief(b.mean + K @ nu, symmetrize(A @ b.cov @ A.T + K @ V @ K.T))


def gaussian_entropy(cov: np.ndarray) -> np.ndarray:
    """Differential entropy ``0.5 logdet(2 pi e cov)`` over the trailing two axes."""
    d = cov.shape[-1]
    return 0.5 * (d * np.log(2 * np.pi * np.e) + np.linalg.slogdet(cov)[1])


# batched information rollout -----------------------------------------------


class GaussianModel(Protocol):
    """Per-target linear-Gaussian process used by :class:`InfoRollout`.

    Each target has a ``dim``-dimensional state whose first ``obs_dim``
    coordinates are measured.  ``process`` is ``"fixed"`` (constant ``W``) or
    ``"revisit"`` (``q k I`` with ``k`` steps since the last observation).
    """

    dim: int
    obs_dim: int
    F: np.ndarray
    W: np.ndarray
    process: str
    q: float


@dataclass
class RolloutState:
    """Batched per-target covariances and revisit counters."""

    cov: np.ndarray  # (B, M, d, d)
    k: np.ndarray  # (B, M)
    score: np.ndarray  # (B,) accumulated sum of logdet reduction


@dataclass
class InfoRollout:
    """Covariance-only rollout over ``T`` steps for ``M`` block-independent targets.

    When ``model.process == "revisit"`` the per-target noise ``q k I`` depends
    on which steps the target is observed, so the seen mask is tracked.
    """

    model: GaussianModel
    prior_cov: np.ndarray  # (M, d, d)
    horizon: int
    k0: np.ndarray | None = None
    _empty_logdet: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        M = self.prior_cov.shape[0]
        if self.k0 is None:
            self.k0 = np.zeros(M, dtype=np.int64)
        obs = self.model.obs_dim
        state = self.initial_state(1)
        logdets = np.empty((self.horizon, M))
        zero_info = np.zeros((1, M, obs, obs))
        zero_seen = np.zeros((1, M), dtype=bool)
        for t in range(self.horizon):
            state = self._step(state, zero_info, zero_seen)
            logdets[t] = np.linalg.slogdet(state.cov[0])[1]
        self._empty_logdet = logdets

    @property
    def num_targets(self) -> int:
        return self.prior_cov.shape[0]

    def initial_state(self, batch: int) -> RolloutState:
        cov = np.broadcast_to(self.prior_cov, (batch,) + self.prior_cov.shape).copy()
        k = np.broadcast_to(self.k0, (batch, self.num_targets)).copy()
        return RolloutState(cov, k, np.zeros(batch))

    def _step(self, state: RolloutState, info, seen) -> RolloutState:
        m = self.model
        F = m.F
        P = F @ state.cov @ F.T
        k = state.k
        if m.process == "revisit":
            k = k + 1
            P = P + (m.q * k)[..., None, None] * np.eye(m.dim)
        else:
            P = P + m.W
        o = m.obs_dim
        A = P[..., :, :o]
        lhs = np.eye(o) + info @ P[..., :o, :o]
        X = np.linalg.solve(lhs, info)
        P = symmetrize(P - A @ X @ np.swapaxes(A, -1, -2))
        if m.process == "revisit":
            k = np.where(seen, 0, k)
        return RolloutState(P, k, state.score)

    def advance(self, state: RolloutState, info: np.ndarray, seen: np.ndarray, t0: int) -> RolloutState:
        """Run steps ``t0 .. t0 + info.shape[1] - 1``.

        ``info`` is ``(B, S, M, o, o)`` and ``seen`` ``(B, S, M)``.
        """
        score = state.score.copy()
        for s in range(info.shape[1]):
            state = self._step(state, info[:, s], seen[:, s])
            ld = np.linalg.slogdet(state.cov)[1]
            score = score + (self._empty_logdet[t0 + s] - ld).sum(axis=-1)
        return RolloutState(state.cov, state.k, score)

    def value(self, info: np.ndarray, seen: np.ndarray) -> float:
        """Objective for a single summed contribution ``info (T, M, o, o)``."""
        state = self.advance(self.initial_state(1), info[None], seen[None], 0)
        return float(state.score[0]) / self.horizon

    def batch_values(self, info: np.ndarray, seen: np.ndarray) -> np.ndarray:
        state = self.advance(self.initial_state(info.shape[0]), info, seen, 0)
        return state.score / self.horizon


def rollout_objective(
    rollout: InfoRollout,
    infos: dict,
    seens: dict,
    subset,
) -> float:
    """Log-det reduction when only robots in ``subset`` measure.

    ``infos[robot]`` holds that robot's per-step info increments ``(T, M, o, o)``
    along its planned states, already gated by the field of view.
    """
    subset = list(subset)
    if not subset:
        return 0.0
    info = sum(infos[r] for r in subset)
    seen = np.logical_or.reduce([seens[r] for r in subset])
    return rollout.value(info, seen)
