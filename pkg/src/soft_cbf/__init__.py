"""Closed-form CLF-CBF safety control for tendon-driven soft continuum robots."""

from ._backend import BACKEND
from .controller import ControlSolution, control_step, solve_closed_form
from .errors import (
    ConfigurationShapeError,
    DegenerateTangentError,
    InfeasibleCBFError,
    IntegrationBlowupError,
    StartInCollisionError,
)
from .integrators import integrate_step_tsit5
from .kinematics import RobotModel, forward_kinematics, positional_jacobian, sphere_chain, tip_position
from .planner import PlannerConfig, PlanResult, low_level_track, plan
from .qp import DenseQP, QPSolution, solve_clf_cbf_qp, solve_qp
from .safety import ConstraintRows, Obstacle, SafetyConfig, assemble_rows, lse_barrier
from .se3 import Pose, exp_se3, log_se3
from .sim import Scenario, load_scenario, run_scenario, tracking_rmse
from .tendons import TendonLayout, actuation_matrices, tendon_lengths

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ControlSolution", "control_step", "solve_closed_form",
    "ConfigurationShapeError", "DegenerateTangentError", "InfeasibleCBFError", "IntegrationBlowupError",
    "StartInCollisionError", "integrate_step_tsit5", "RobotModel", "forward_kinematics",
    "positional_jacobian", "sphere_chain", "tip_position", "PlannerConfig", "PlanResult",
    "low_level_track", "plan", "DenseQP", "QPSolution", "solve_clf_cbf_qp", "solve_qp",
    "ConstraintRows", "Obstacle", "SafetyConfig", "assemble_rows", "lse_barrier", "Pose",
    "exp_se3", "log_se3", "Scenario", "load_scenario", "run_scenario", "tracking_rmse",
    "TendonLayout", "actuation_matrices", "tendon_lengths",
]
