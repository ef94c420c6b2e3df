from rainplan.estimation.gaussian import (
    GaussianBelief,
    InfoRollout,
    ekf_update,
    gaussian_entropy,
    kf_predict,
    kf_update_covariance,
    rollout_objective,
)
from rainplan.estimation.grid import (
    OccupancyGrid,
    beam_csqmi,
    csqmi,
    grid_entropy,
    grid_update,
    ray_trace,
)

__all__ = [
    "GaussianBelief",
    "InfoRollout",
    "OccupancyGrid",
    "beam_csqmi",
    "csqmi",
    "ekf_update",
    "gaussian_entropy",
    "grid_entropy",
    "grid_update",
    "kf_predict",
    "kf_update_covariance",
    "ray_trace",
    "rollout_objective",
]
