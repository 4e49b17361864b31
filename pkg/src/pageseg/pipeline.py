"""End-to-end inference helpers shared by the CLI, server, and training."""

from __future__ import annotations

import numpy as np

from .dataset import normalize_image
from .errors import EmptyMask
from .fcn import FcnModel, forward
from .geometry import Quad
from .baselines import predict_full_image
from .quadfit import extract_quad, upscale_quad
from .raster import fill_holes, largest_component, threshold

__all__ = ["predict_probmap", "cleanup_mask", "predict_quad"]


def predict_probmap(model: FcnModel, img: np.ndarray, input_size: int = 256) -> np.ndarray:
    """Page probability map at the processing resolution."""
    x = normalize_image(img, input_size)
    return forward(model, x[None])[0]


def cleanup_mask(prob: np.ndarray, t: float = 0.5) -> np.ndarray:
    """Thresholded prediction after component and hole cleanup.

    Raises EmptyMask when nothing reaches the threshold.
    """
    mask = threshold(prob, t)
    if not mask.any():
        raise EmptyMask("no pixel reached the threshold")
    return fill_holes(largest_component(mask))


def predict_quad(
    model: FcnModel,
    img: np.ndarray,
    input_size: int = 256,
    on_empty: str = "full-image",
) -> Quad:
    """Probability map -> quad, upscaled to the image's own coordinates.

    on_empty selects what happens when thresholding finds no foreground:
    "full-image" substitutes the whole frame, "error" re-raises EmptyMask.
    """
    if on_empty not in ("full-image", "error"):
        raise ValueError(f"unknown on_empty mode {on_empty!r}")
    h, w = img.shape[:2]
    prob = predict_probmap(model, img, input_size)
    try:
        quad = extract_quad(prob)
    except EmptyMask:
        if on_empty == "error":
            raise
        return predict_full_image(w, h)
    return upscale_quad(quad, prob.shape, (h, w))
