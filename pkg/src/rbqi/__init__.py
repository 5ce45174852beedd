"""Reconstructed Background Quality Index and baseline quality metrics."""

from .baselines import PSNR_IDENTICAL, BaselineParams, age, error_pixels, msssim, psnr, ssim
from .color import ColorParams, ajncd_threshold, color_distance, gaussian_blur
from .errors import RBQIError
from .evaluation import (
    DatasetManifest,
    EvaluationReport,
    LogisticFit,
    MetricConfig,
    correlations,
    evaluate,
    fit_logistic,
    load_manifest,
)
from .image import ColorSpace, ImagePair, PlanarImage, load_image, load_pair, to_gray, to_lab
from .pooling import PoolingParams, RbqiResult, pool_to_score, rbqi
from .pyramid import PyramidPair, build_pyramid
from .structure import StructureParams, classify_texture, structure_index

__version__ = "0.1.0"

__all__ = [
    "PSNR_IDENTICAL",
    "BaselineParams",
    "ColorParams",
    "ColorSpace",
    "DatasetManifest",
    "EvaluationReport",
    "ImagePair",
    "LogisticFit",
    "MetricConfig",
    "PlanarImage",
    "PoolingParams",
    "PyramidPair",
    "RBQIError",
    "RbqiResult",
    "StructureParams",
    "age",
    "ajncd_threshold",
    "build_pyramid",
    "classify_texture",
    "color_distance",
    "correlations",
    "error_pixels",
    "evaluate",
    "fit_logistic",
    "gaussian_blur",
    "load_image",
    "load_pair",
    "load_manifest",
    "msssim",
    "pool_to_score",
    "psnr",
    "rbqi",
    "ssim",
    "structure_index",
    "to_gray",
    "to_lab",
]
