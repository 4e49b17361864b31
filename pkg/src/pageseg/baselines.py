"""Reference systems: full-image prediction and the mean quadrilateral.

The mean quadrilateral averages width/height-normalized ground-truth
corners over a training set (corners matched in canonical order) and
rescales them to each test image's dimensions.  The full-image baseline
predicts the whole frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyDataset, ParseError
from .geometry import Point, Quad, canonicalize
from .image_io import atomic_write_text

__all__ = [
    "MeanQuadModel",
    "fit_mean_quad",
    "predict_mean_quad",
    "predict_full_image",
    "save_mean_quad",
    "load_mean_quad",
]

_FORMAT_LINE = "pageseg-meanquad 1"


@dataclass(frozen=True)
class MeanQuadModel:
    """Four corners as unitless fractions of image width/height."""

    corners: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.corners) != 4:
            raise ValueError("mean quad model has exactly 4 corners")
        if not all(np.isfinite(c).all() for c in map(np.asarray, self.corners)):
            raise ValueError("mean quad corners must be finite")


def fit_mean_quad(annotations) -> MeanQuadModel:
    """Corner-wise mean of normalized ground-truth corners.

    Each record's quad is canonicalized so corner n always refers to the
    same position in the ordering, then divided by the record's width and
    height before averaging.
    """
    annotations = list(annotations)
    if not annotations:
        raise EmptyDataset("fit_mean_quad needs at least one record")
    acc = np.zeros((4, 2))
    for rec in annotations:
        if rec.width <= 0 or rec.height <= 0:
            raise ValueError(f"record {rec.image_path!r} has non-positive dimensions")
        quad = canonicalize(rec.quad.corners)
        acc += quad.to_array() / np.array([rec.width, rec.height], dtype=float)
    acc /= len(annotations)
    return MeanQuadModel(tuple((float(x), float(y)) for x, y in acc))


def predict_mean_quad(model: MeanQuadModel, width: int, height: int) -> Quad:
    """Model corners scaled by the target image's width and height."""
    if width <= 0 or height <= 0:
        raise ValueError("dimensions must be positive")
    return Quad(tuple(Point(x * width, y * height) for x, y in model.corners))


def predict_full_image(width: int, height: int) -> Quad:
    """The whole frame as the predicted main page region."""
    if width <= 0 or height <= 0:
        raise ValueError("dimensions must be positive")
    return canonicalize([(0, 0), (width, 0), (width, height), (0, height)])


def save_mean_quad(path, model: MeanQuadModel) -> None:
    lines = [_FORMAT_LINE]
    for x, y in model.corners:
        lines.append(f"{x!r} {y!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_mean_quad(path) -> MeanQuadModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != _FORMAT_LINE:
        raise ParseError("not a mean-quad model file", path=str(path), line=1)
    if len(lines) < 5:
        raise ParseError("expected 4 corner lines", path=str(path), line=len(lines))
    corners = []
    for i, line in enumerate(lines[1:5], start=2):
        parts = line.split()
        if len(parts) != 2:
            raise ParseError("corner line must be two numbers", path=str(path), line=i)
        corners.append((float(parts[0]), float(parts[1])))
    return MeanQuadModel(tuple(corners))
