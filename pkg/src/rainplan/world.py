"""Robot dynamics, target processes and sensor models.

Scalar operations work on dataclasses and are the reference implementation.
The ``*_batch`` helpers are their vectorized twins used by the planners; the
tests check the two against each other.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from rainplan.errors import TargetAtSensor

MIN_RANGE = 1e-9
VARIANCE_FLOOR = 1e-6
RANGE_ONLY_VARIANCE = 0.1**2


def wrap_angle(theta):
    """Wrap to the half-open interval (-pi, pi]."""
    return np.pi - np.mod(np.pi - theta, 2.0 * np.pi)


def sinc(x):
    """Unnormalized sinc, sin(x)/x with sinc(0) = 1."""
    return np.sinc(np.asarray(x) / np.pi)


@dataclass(frozen=True)
class RobotState:
    x1: float
    x2: float
    theta: float
    x3: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.theta])

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x1, self.x2])

    @property
    def position3(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.x3])


@dataclass(frozen=True)
class ControlInput:
    v: float
    omega: float


ControlSequence = tuple  # tuple[ControlInput, ...] of length t_plan


@dataclass(frozen=True)
class SensorConfig:
    r_sense: float = 10.0
    psi: float = np.deg2rad(94.0)
    sigma_r: float = 0.15
    sigma_b: float = np.deg2rad(5.0)

    def __post_init__(self):
        if min(self.r_sense, self.psi, self.sigma_r, self.sigma_b) <= 0:
            raise ValueError("sensor parameters must be positive")
        if self.psi > 2 * np.pi:
            raise ValueError("field of view exceeds 2 pi")


@dataclass(frozen=True)
class BeamSensorConfig:
    num_beams: int = 16
    z_min: float = 0.1
    z_max: float = 1.5
    sigma: float = 0.01

    def __post_init__(self):
        if not 0 <= self.z_min < self.z_max:
            raise ValueError("need 0 <= z_min < z_max")
        if self.num_beams < 1 or self.sigma <= 0:
            raise ValueError("need at least one beam and positive sigma")

    def beam_angles(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.num_beams) / self.num_beams


class Observation(NamedTuple):
    h: np.ndarray
    H: np.ndarray
    V: np.ndarray


# dynamics -----------------------------------------------------------------


def unicycle_step(s: RobotState, u: ControlInput, tau: float) -> RobotState:
    """Exact zero-order-hold unicycle integration over one step of length ``tau``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    half = u.omega * tau / 2.0
    dist = u.v * tau * float(sinc(half))
    return RobotState(
        s.x1 + dist * np.cos(s.theta + half),
        s.x2 + dist * np.sin(s.theta + half),
        float(wrap_angle(s.theta + tau * u.omega)),
        s.x3,
    )


def unicycle3d_step(s: RobotState, u: ControlInput, tau: float) -> RobotState:
    """Planar unicycle at constant altitude ``x3``."""
    return unicycle_step(s, u, tau)


def unicycle_step_batch(poses: np.ndarray, controls: np.ndarray, tau: float) -> np.ndarray:
    """Vectorized step: ``poses[..., 3]`` (x, y, theta), ``controls[..., 2]`` (v, omega)."""
    v, w = controls[..., 0], controls[..., 1]
    th = poses[..., 2]
    half = w * tau / 2.0
    dist = v * tau * sinc(half)
    out = np.empty(np.broadcast_shapes(poses.shape, controls.shape[:-1] + (3,)))
    out[..., 0] = poses[..., 0] + dist * np.cos(th + half)
    out[..., 1] = poses[..., 1] + dist * np.sin(th + half)
    out[..., 2] = wrap_angle(th + tau * w)
    return out


def rollout_poses(start: np.ndarray, controls: np.ndarray, tau: float) -> np.ndarray:
    """Poses after each control. ``controls`` is ``(..., T, 2)``; result ``(..., T, 3)``."""
    T = controls.shape[-2]
    out = np.empty(controls.shape[:-1] + (3,))
    pose = np.broadcast_to(start, controls.shape[:-2] + (3,))
    for t in range(T):
        pose = unicycle_step_batch(pose, controls[..., t, :], tau)
        out[..., t, :] = pose
    return out


def double_integrator_model(tau: float, q: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-target transition ``F`` and process covariance ``W`` for state (p, v) in 2D."""
    if tau <= 0 or q < 0:
        raise ValueError("need tau > 0 and q >= 0")
    I2 = np.eye(2)
    F = np.block([[I2, tau * I2], [np.zeros((2, 2)), I2]])
    W = q * np.block([[tau**3 / 3 * I2, tau**2 / 2 * I2], [tau**2 / 2 * I2, tau * I2]])
    return F, W


def reflect_in_box(states: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Fold positions back into ``[lo, hi]`` and negate the offending velocity.

    ``states`` is ``(M, 4)`` with rows (px, py, vx, vy).
    """
    out = states.copy()
    for ax in range(2):
        p, v = out[:, ax], out[:, ax + 2]
        below, above = p < lo, p > hi
        p[below] = 2 * lo - p[below]
        p[above] = 2 * hi - p[above]
        v[below | above] *= -1
        np.clip(p, lo, hi, out=p)
    return out


def landmark_noise(k: int, q: float) -> np.ndarray:
    """Process noise ``q k I3`` for a landmark unvisited for ``k`` steps."""
    if k < 0:
        raise ValueError("k must be non-negative")
    return q * k * np.eye(3)


# sensors ------------------------------------------------------------------


def _noise_scale(r, r_sense):
    return np.minimum(r / r_sense, 1.0)


def range_bearing_observe(s: RobotState, y_m: Sequence[float], cfg: SensorConfig):
    """Range and bearing to a 2D point, or ``None`` outside range or field of view.

    The Jacobian is taken with respect to the target state (px, py, vx, vy).
    """
    dx, dy = y_m[0] - s.x1, y_m[1] - s.x2
    r = float(np.hypot(dx, dy))
    if r < MIN_RANGE:
        raise TargetAtSensor("target coincides with the sensor")
    b = float(wrap_angle(np.arctan2(dy, dx) - s.theta))
    if r > cfg.r_sense or abs(b) > cfg.psi / 2:
        return None
    H = np.zeros((2, 4))
    H[0, :2] = [dx / r, dy / r]
    H[1, :2] = [-dy / r**2, dx / r**2]
    scale = float(_noise_scale(r, cfg.r_sense))
    V = np.diag(
        [max(cfg.sigma_r**2 * scale, VARIANCE_FLOOR), max(cfg.sigma_b**2 * scale, VARIANCE_FLOOR)]
    )
    return Observation(np.array([r, b]), H, V)


def range_bearing_h(pose: np.ndarray, y: np.ndarray) -> np.ndarray:
    dx, dy = y[0] - pose[0], y[1] - pose[1]
    return np.array([np.hypot(dx, dy), wrap_angle(np.arctan2(dy, dx) - pose[2])])


def range_bearing_info_batch(poses: np.ndarray, targets: np.ndarray, cfg: SensorConfig):
    """Information increments ``H^T V^-1 H`` on the position block.

    ``poses`` is ``(..., 3)``, ``targets`` ``(M, 2)``. Returns ``(info, seen)``
    with shapes ``(..., M, 2, 2)`` and ``(..., M)``; out-of-view entries are zero.
    """
    d = targets - poses[..., None, :2]
    dx, dy = d[..., 0], d[..., 1]
    r2 = dx * dx + dy * dy
    r = np.sqrt(r2)
    b = wrap_angle(np.arctan2(dy, dx) - poses[..., None, 2])
    seen = (r <= cfg.r_sense) & (np.abs(b) <= cfg.psi / 2) & (r >= MIN_RANGE)
    rs = np.where(seen, r, 1.0)
    scale = _noise_scale(rs, cfg.r_sense)
    inv_vr = 1.0 / np.maximum(cfg.sigma_r**2 * scale, VARIANCE_FLOOR)
    inv_vb = 1.0 / np.maximum(cfg.sigma_b**2 * scale, VARIANCE_FLOOR)
    ur = np.stack([dx, dy], -1) / rs[..., None]
    ub = np.stack([-dy, dx], -1) / (rs * rs)[..., None]
    info = (
        inv_vr[..., None, None] * ur[..., :, None] * ur[..., None, :]
        + inv_vb[..., None, None] * ub[..., :, None] * ub[..., None, :]
    )
    info *= seen[..., None, None]
    return info, seen


def range_only_observe(s: RobotState, y_m: Sequence[float], r_sense: float):
    """3D range to a landmark, or ``None`` beyond ``r_sense``."""
    d = np.asarray(y_m, dtype=float) - s.position3
    r = float(np.linalg.norm(d))
    if r < MIN_RANGE:
        raise TargetAtSensor("landmark coincides with the sensor")
    if r > r_sense:
        return None
    return Observation(np.array([r]), (d / r)[None, :], np.array([[RANGE_ONLY_VARIANCE]]))


def range_only_info_batch(positions: np.ndarray, landmarks: np.ndarray, r_sense: float,
                          variance: float = RANGE_ONLY_VARIANCE):
    """``positions`` ``(..., 3)`` and ``landmarks`` ``(M, 3)`` to ``(..., M, 3, 3)`` info and ``(..., M)`` mask."""
    d = landmarks - positions[..., None, :]
    r = np.linalg.norm(d, axis=-1)
    seen = (r <= r_sense) & (r >= MIN_RANGE)
    u = d / np.where(seen, r, 1.0)[..., None]
    info = (u[..., :, None] * u[..., None, :]) / variance
    info *= seen[..., None, None]
    return info, seen


def beam_mean(d, cfg: BeamSensorConfig):
    """Expected beam reading for true hit distance ``d`` (``inf`` for no hit)."""
    d = np.asarray(d, dtype=float)
    return np.where(d < cfg.z_min, 0.0, np.where(d > cfg.z_max, cfg.z_max, d))


def beam_likelihood(d, z, cfg: BeamSensorConfig):
    """Gaussian beam density ``p(z | d)`` with saturation at both range limits."""
    mu = beam_mean(d, cfg)
    return np.exp(-0.5 * ((np.asarray(z) - mu) / cfg.sigma) ** 2) / (cfg.sigma * np.sqrt(2 * np.pi))
