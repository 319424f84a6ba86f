"""Information-guided gimbal view planning for ground robots with a visual localisation camera."""

from .errors import *  # noqa: F401,F403
from .geometry import GimbalCommand, GimbalState, Pose, bearing, bearing_jacobian, gimbal_ik, gimbal_track_step
from .infomap import InfoMap, MapSnapshot, NoiseModel, fisher_matrix, fisher_trace
from .infomodel import InfoCurve, LocalInfoModel, build_local_model, curve_argmax, fit_curve, global_best
from .planner import HorizonParams, PlannerConfig, plan_step, rho_optimize
from .sampling import SamplerParams, best_sample, evaluate_gains, generate_samples

__version__ = "0.1.0"
