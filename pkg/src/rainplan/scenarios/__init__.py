from rainplan.scenarios.config import (
    ScenarioConfig,
    apply_overrides,
    build,
    build_occupancy,
    build_surveillance,
    build_tracking,
)
from rainplan.scenarios.metrics import TrialRecord, compute_metrics, unobserved_durations

__all__ = [
    "ScenarioConfig",
    "TrialRecord",
    "apply_overrides",
    "build",
    "build_occupancy",
    "build_surveillance",
    "build_tracking",
    "compute_metrics",
    "unobserved_durations",
]
