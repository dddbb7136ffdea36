"""Optical flow for camera-shake-blurred frames.

Blind kernel estimation, motion-guided directional kernel filtering and a
blur-robust variational flow solver, with a synthetic benchmark harness.
"""

__version__ = "0.1.0"

from .imgcore import (  # noqa: E402
    Pyramid, build_pyramid, convolve_frequency, convolve_spatial, derivatives, resample, warp_bilinear,
)
from .motion import CameraMotionSample, PoseDelta, combine_motions, load_motion_channel, project_motion  # noqa: E402
from .deconv import KernelEstimationParams, estimate_kernel, non_blind_deconvolve, normalize_kernel  # noqa: E402
from .dirfilter import (  # noqa: E402
    DirectionalFilterParams, directional_highpass_frequency, directional_highpass_spatial, enhance_kernel,
    frequency_response,
)
from .flowsolver import EnergyParams, evaluate_energy, mutual_blur, solve_level  # noqa: E402
from .automotion import AffineModel, RansacParams, affine_to_motion_angle, estimate_affine_ransac  # noqa: E402
from .pipeline import PipelineConfig, PipelineResult, run_algorithm1, run_algorithm2  # noqa: E402
from .io import read_flo, read_image, write_flo  # noqa: E402
from .bench import compute_aae, compute_aee, filter_ground_truth  # noqa: E402

__all__ = [
    "Pyramid", "build_pyramid", "convolve_frequency", "convolve_spatial", "derivatives", "resample", "warp_bilinear",
    "CameraMotionSample", "PoseDelta", "combine_motions", "load_motion_channel", "project_motion",
    "KernelEstimationParams", "estimate_kernel", "non_blind_deconvolve", "normalize_kernel",
    "DirectionalFilterParams", "directional_highpass_frequency", "directional_highpass_spatial", "enhance_kernel",
    "frequency_response",
    "EnergyParams", "evaluate_energy", "mutual_blur", "solve_level",
    "AffineModel", "RansacParams", "affine_to_motion_angle", "estimate_affine_ransac",
    "PipelineConfig", "PipelineResult", "run_algorithm1", "run_algorithm2",
    "read_flo", "read_image", "write_flo",
    "compute_aae", "compute_aee", "filter_ground_truth",
    "__version__",
]
