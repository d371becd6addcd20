"""Occlusion-aware, frequency-refined view priors for extrapolated view synthesis."""

from .blend import BlendConfig, fft2, make_weight_map, refine_prior
from .errors import (
    BadCount,
    BadTimestep,
    BehindCamera,
    DegeneratePose,
    DimensionMismatch,
    EvsError,
    MissingAsset,
    MissingCoarse,
    ParseError,
)
from .geometry import (
    CameraView,
    Intrinsics,
    Pose,
    elevate_view,
    look_at,
    pitch_angle,
    relative_transform,
    split_disparity,
)
from .objective import (
    LossWeights,
    NoiseSchedule,
    appearance_loss,
    coarse_loss,
    diffuse,
    fine_loss,
    geometry_loss,
    photometric_loss,
    psnr,
    ssim,
)
from .raster import DepthMap, TriangleMesh, rasterize_depth, raycast_depth
from .warp import (
    OcclusionConfig,
    Provenance,
    ViewPrior,
    bilinear_sample,
    generate_view_prior,
    reproject_pixel,
    reverse_reproject,
)

__version__ = "0.1.0"

__all__ = [
    "appearance_loss",
    "BadCount",
    "BadTimestep",
    "BehindCamera",
    "bilinear_sample",
    "BlendConfig",
    "CameraView",
    "coarse_loss",
    "DegeneratePose",
    "DepthMap",
    "diffuse",
    "DimensionMismatch",
    "elevate_view",
    "EvsError",
    "fft2",
    "fine_loss",
    "generate_view_prior",
    "geometry_loss",
    "Intrinsics",
    "look_at",
    "LossWeights",
    "make_weight_map",
    "MissingAsset",
    "MissingCoarse",
    "NoiseSchedule",
    "OcclusionConfig",
    "ParseError",
    "photometric_loss",
    "pitch_angle",
    "Pose",
    "Provenance",
    "psnr",
    "rasterize_depth",
    "raycast_depth",
    "refine_prior",
    "relative_transform",
    "reproject_pixel",
    "reverse_reproject",
    "split_disparity",
    "ssim",
    "TriangleMesh",
    "ViewPrior",
]
