"""Risk-sensitive sampling-based MPC for robot navigation among pedestrians.

The planner perturbs a nominal acceleration schedule along the mode
insertion gradient of the entropic risk of Monte Carlo rollout costs.
See the README for the method outline and the CLI entry points.
"""

from .cost import CostParams, ReferenceTrajectory
from .dynamics import ControlSchedule, JointState, TimeGrid, Trajectory, rollout
from .predictor import HumanTransitionSamples, PredictorConfig, TransitionSampler
from .risk import entropic_risk, risk_weights, weighted_adjoint
from .rssac import (
    Perturbation,
    RssacConfig,
    RssacController,
    StepInfo,
    adjoint_rollout,
    epsilon_search,
    mode_insertion_gradient,
    nominal_search,
    optimal_action,
    optimize_perturbation,
    perturb_schedule,
    rssac_step,
)

__all__ = [
    "CostParams",
    "ReferenceTrajectory",
    "ControlSchedule",
    "JointState",
    "TimeGrid",
    "Trajectory",
    "rollout",
    "HumanTransitionSamples",
    "PredictorConfig",
    "TransitionSampler",
    "entropic_risk",
    "risk_weights",
    "weighted_adjoint",
    "Perturbation",
    "RssacConfig",
    "RssacController",
    "StepInfo",
    "adjoint_rollout",
    "epsilon_search",
    "mode_insertion_gradient",
    "nominal_search",
    "optimal_action",
    "optimize_perturbation",
    "perturb_schedule",
    "rssac_step",
]

__version__ = "0.1.0"
