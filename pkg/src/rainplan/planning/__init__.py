from rainplan.planning.objective import (
    GaussianTeamObjective,
    PrimitiveLibrary,
    best_response,
    induced_set_objective,
)
from rainplan.planning.planners import (
    PlanAssignment,
    RtpResult,
    coordinate_descent,
    joint_optimum,
    rtp,
    single_robot_plan,
)
from rainplan.planning.rain import HorizonConfig, rain_run, run_loop

__all__ = [
    "GaussianTeamObjective",
    "HorizonConfig",
    "PlanAssignment",
    "PrimitiveLibrary",
    "RtpResult",
    "best_response",
    "coordinate_descent",
    "induced_set_objective",
    "joint_optimum",
    "rain_run",
    "rtp",
    "run_loop",
    "single_robot_plan",
]
