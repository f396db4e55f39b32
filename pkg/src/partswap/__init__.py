"""Part-level face swapping through a 3D morphable model prior."""

from .camera_fit import AffineCamera, Rotation3D, estimate_camera, extract_rotation, project
from .errors import (
    ConvergenceError,
    DegenerateCameraError,
    DegenerateGeometryError,
    DegenerateHullError,
    ModelFormatError,
    PartSwapError,
    SingularSystemError,
    SingularWarpError,
    UnknownPartError,
)
from .image_io import RasterImage, load_image, load_landmarks, load_mask, save_image, save_landmarks
from .model_core import (
    MorphableModel,
    Shape3D,
    deform_shape,
    extract_landmarks3d,
    generate_synthetic_model,
    generate_synthetic_model_with_reference,
    load_model,
    save_model,
)
from .patch_warp import Affine2D, WarpCanvas, triangle_affine, warp_pairs
from .pipeline import ImageBundle, SwapJob, SwapResult, SwapStatus, run_swap
from .region_select import (
    TrianglePair,
    VisibilityResult,
    hpr_visibility,
    part_triangles,
    select_valid_pairs,
    shape_visibility,
)
from .seamless_blend import (
    BlendRegion,
    GuidanceField,
    build_region,
    seamless_clone,
    solve_poisson,
)
from .shape_fit import FitParams, FitResult, fit_image, solve_coefficients

__version__ = "0.1.0"
