"""Grid-initialized convex path reshaping for a point robot in the plane."""

from .cfs import CfsConfig, CfsResult, CfsStatus, build_objective, cfs_reshape
from .curvature import CurvatureConfig, enforce_curvature, erpr_plan
from .env import (GridEnvironment, Obstacle, Workspace, environment_from_dict, load_environment,
                  rasterize_and_dilate, save_environment)
from .errors import InputError, IoError, PlanningError, Unreachable
from .roadmap import build_roadmap, initial_path
from .rpr import PlanResult, PlanStatus, RprConfig, rpr_plan

__version__ = "0.1.0"

__all__ = [
    "CfsConfig", "CfsResult", "CfsStatus", "CurvatureConfig", "GridEnvironment", "InputError",
    "IoError", "Obstacle", "PlanResult", "PlanStatus", "PlanningError", "RprConfig", "Unreachable",
    "Workspace", "build_objective", "build_roadmap", "cfs_reshape", "enforce_curvature",
    "environment_from_dict", "erpr_plan", "initial_path", "load_environment", "rasterize_and_dilate",
    "rpr_plan", "save_environment",
]
