"""Rigid motion simulation and autofocus compensation for cone-beam CT."""

from .geometry import (
    RigidParams,
    ScanGeometry,
    Trajectory,
    circular_trajectory,
    default_geometry,
    desk_geometry,
    perturb_trajectory,
    rigid_matrix,
)
from .motion import (
    SplineMotionModel,
    cutoff_schedule,
    fit_spline_least_squares,
    nyquist_limit,
    sample_bandlimited,
    sample_motion_curve,
    spline_to_curve,
)
from .compensator import MotionCompensator
from .metrics import MarkerSet, MetricRecord, evaluate_run, rpe, ssim3d
from .phantom import Ellipsoid, PhantomSpec, head_phantom, render_phantom
from .projector import backproject, fdk_reconstruct, filter_sinogram, forward_project
from .volume import Sinogram, Volume, load_sinogram, load_volume, save_sinogram, save_volume

__version__ = "0.1.0"
