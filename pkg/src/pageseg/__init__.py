"""Main page region extraction for document images.

A multi-scale fully convolutional pixel classifier, geometric
post-processing that turns masks into bounding quadrilaterals, reference
baselines, and an mIoU evaluation harness with human-agreement scoring.
"""

from .errors import (
    EmptyDataset,
    EmptyMask,
    MissingImage,
    MissingPrediction,
    ModelFileError,
    PagesegError,
    ParseError,
    ShapeMismatch,
)
from .geometry import (
    OrientedRect,
    Point,
    Quad,
    canonicalize,
    convex_hull,
    mask_quad_iou,
    polygon_area,
    quad_iou,
)
from .raster import fill_holes, largest_component, rasterize_quad, resize_bilinear, threshold
from .quadfit import extract_quad, min_area_rect, refine_quad, upscale_quad
from .fcn import FcnModel, forward, init_model, load_model, save_model
from .training import TrainConfig, TrainResult, train
from .baselines import MeanQuadModel, fit_mean_quad, predict_full_image, predict_mean_quad
from .dataset import AnnotationRecord, Sample, load_annotations, preprocess, save_annotations, split
from .synthetic import SyntheticSpec, generate_synthetic
from .evaluation import EvalReport, evaluate_pixels, evaluate_quads, human_agreement
from .pipeline import cleanup_mask, predict_probmap, predict_quad

__version__ = "0.1.0"

__all__ = [
    "PagesegError",
    "ShapeMismatch",
    "EmptyMask",
    "EmptyDataset",
    "ParseError",
    "MissingImage",
    "MissingPrediction",
    "ModelFileError",
    "Point",
    "Quad",
    "OrientedRect",
    "canonicalize",
    "polygon_area",
    "quad_iou",
    "convex_hull",
    "mask_quad_iou",
    "threshold",
    "largest_component",
    "fill_holes",
    "rasterize_quad",
    "resize_bilinear",
    "min_area_rect",
    "refine_quad",
    "extract_quad",
    "upscale_quad",
    "FcnModel",
    "init_model",
    "forward",
    "save_model",
    "load_model",
    "TrainConfig",
    "TrainResult",
    "train",
    "MeanQuadModel",
    "fit_mean_quad",
    "predict_mean_quad",
    "predict_full_image",
    "AnnotationRecord",
    "Sample",
    "load_annotations",
    "save_annotations",
    "preprocess",
    "split",
    "SyntheticSpec",
    "generate_synthetic",
    "EvalReport",
    "evaluate_quads",
    "evaluate_pixels",
    "human_agreement",
    "predict_probmap",
    "cleanup_mask",
    "predict_quad",
]
