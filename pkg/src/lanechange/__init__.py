"""Lane-change trajectory planning for a point-mass ego vehicle.

The package couples a Markov-chain predictor for surrounding-vehicle
longitudinal motion with an indirect optimal-control planner that threads
the ego vehicle through a moving safety-region corner at a free interior
time, plus a direct-transcription oracle used for verification.
"""

from lanechange.model import (
    AxisCubic,
    BoundaryConditions,
    ControlInput,
    CostateVector,
    EgoState,
    Trajectory,
    integrate_dynamics,
    sample_cubic_pair,
)
from lanechange.planner import (
    ConstraintSide,
    InfeasibleError,
    PiecewiseCubicPlan,
    PlanningProblem,
    SafetyEnvelope,
    SolverError,
    constraint_target,
    costates_at,
    hamiltonian_jump_residual,
    plan,
    plan_cost,
    solve_fixed_time,
    unconstrained_plan,
)
from lanechange.predictor import (
    MarkovModel,
    ObservationHistory,
    ObstaclePolynomial,
    StateGrid,
    default_state_grid,
    discretize,
    estimate_transition_matrices,
    fit_lag_weights,
    predict_distribution,
    predict_trajectory,
)
from lanechange.oracle import DiscretePlan, grid_search_time, solve_collocation

__all__ = [
    "AxisCubic",
    "BoundaryConditions",
    "ConstraintSide",
    "ControlInput",
    "CostateVector",
    "DiscretePlan",
    "EgoState",
    "InfeasibleError",
    "MarkovModel",
    "ObservationHistory",
    "ObstaclePolynomial",
    "PiecewiseCubicPlan",
    "PlanningProblem",
    "SafetyEnvelope",
    "SolverError",
    "StateGrid",
    "Trajectory",
    "constraint_target",
    "costates_at",
    "default_state_grid",
    "discretize",
    "estimate_transition_matrices",
    "fit_lag_weights",
    "grid_search_time",
    "hamiltonian_jump_residual",
    "integrate_dynamics",
    "plan",
    "plan_cost",
    "predict_distribution",
    "predict_trajectory",
    "sample_cubic_pair",
    "solve_collocation",
    "solve_fixed_time",
    "unconstrained_plan",
]
