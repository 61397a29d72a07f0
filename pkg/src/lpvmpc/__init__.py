"""Vehicle path tracking and obstacle avoidance with LPV-MPC and nonlinear MPC."""

from .config import MpcConfig
from .constraints import ObstacleCircle
from .lpvmpc import LpvMpcController
from .nmpc import NmpcController, SqpSettings
from .qp import QpProblem, QpSolver, QpStatus, solve
from .reference import RoadSpec
from .scenario import load_scenario, shipped_scenario
from .sim import Scenario, compute_metrics, run, run_single
from .vehicle import VehicleParams

__all__ = [
    "LpvMpcController", "MpcConfig", "NmpcController", "ObstacleCircle", "QpProblem",
    "QpSolver", "QpStatus", "RoadSpec", "Scenario", "SqpSettings", "VehicleParams",
    "compute_metrics", "load_scenario", "run", "run_single", "shipped_scenario", "solve",
]
