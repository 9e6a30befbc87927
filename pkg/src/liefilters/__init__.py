"""Minimum energy filtering and Kalman baselines for rigid motion on SE(3)."""

from .ekf import EkfConfig, EkfState, SingularInnovationError, ekf_propagate, ekf_run, ekf_update
from .integrators import (
    FixedPointDivergedError,
    RiccatiSolveError,
    lie_midpoint_step,
    riccati_implicit_euler_step,
    rk4_step,
)
from .lie import (
    MotionState,
    PrincipalBranchError,
    geodesic_distance,
    prod_exp,
    prod_log,
    se3_exp,
    se3_log,
    se3_mat,
    se3_vec,
)
from .mef import (
    FilterConfig,
    FilterRunError,
    FilterState,
    mef_frame_step,
    mef_step,
    run_filter,
)
from .observation import DegenerateDepthError, LinearObservation, Observation
from .synth import (
    NoiseModel,
    Scene,
    Track,
    generate_track,
    geodesic_error_series,
    load_pose_file,
    observation_stream,
    observe_frame,
    rotation_error_deg,
    save_pose_file,
    translation_error,
)

__version__ = "0.1.0"

__all__ = [
    "DegenerateDepthError",
    "EkfConfig",
    "EkfState",
    "FilterConfig",
    "FilterRunError",
    "FilterState",
    "FixedPointDivergedError",
    "LinearObservation",
    "MotionState",
    "NoiseModel",
    "Observation",
    "PrincipalBranchError",
    "RiccatiSolveError",
    "Scene",
    "SingularInnovationError",
    "Track",
    "ekf_propagate",
    "ekf_run",
    "ekf_update",
    "generate_track",
    "geodesic_distance",
    "geodesic_error_series",
    "lie_midpoint_step",
    "load_pose_file",
    "mef_frame_step",
    "mef_step",
    "observation_stream",
    "observe_frame",
    "prod_exp",
    "prod_log",
    "riccati_implicit_euler_step",
    "rk4_step",
    "rotation_error_deg",
    "run_filter",
    "save_pose_file",
    "se3_exp",
    "se3_log",
    "se3_mat",
    "se3_vec",
    "translation_error",
]
