"""Pose-kernel Gaussian-process fusion of latent encodings for multi-view stereo."""
from .batch import BatchPosterior, batch_posterior, log_marginal_likelihood
from .errors import (
    BatchTooLarge,
    DimensionMismatch,
    FactorizationFailure,
    GPMVSError,
    InvalidRange,
    NonPositiveInnovation,
    NotARotation,
    NoValidPixels,
    TensorFormatError,
    UnsupportedKernel,
)
from .kernels import GramMatrix, KernelFamily, KernelSpec, exponential, gram_matrix, matern32, td_distance
from .metrics import DepthMap, MetricsReport, evaluate
from .online import (
    OnlineState,
    Transition,
    extract_latent,
    init_state,
    predict,
    step,
    transition,
    update,
)
from .planesweep import CostVolume, Intrinsics, cost_volume, depth_planes, homography, warp_image
from .poses import Pose, RelativePose, pose_distance, relative_pose, rotation_angle, validate_rotation

__version__ = "0.1.0"
