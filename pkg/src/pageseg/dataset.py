"""Annotation storage, preprocessing, and dataset splits.

Annotation files are line-delimited UTF-8 text with LF endings, one record
per line:

    path TAB width TAB height TAB x1,y1 TAB x2,y2 TAB x3,y3 TAB x4,y4 [TAB annotator_id]

Corners are stored in canonical clockwise order; coordinates are decimal
numbers and may fall marginally outside the frame (pages touching the scan
edge get annotated that way).  Duplicate image paths within one file are
rejected.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyDataset, ParseError, ShapeMismatch
from .geometry import Quad, canonicalize
from .image_io import atomic_write_text, read_image
from .raster import rasterize_quad, resize_bilinear

__all__ = [
    "AnnotationRecord",
    "Sample",
    "load_annotations",
    "save_annotations",
    "parse_annotation_line",
    "format_annotation_line",
    "load_record_image",
    "normalize_image",
    "preprocess",
    "split",
]


@dataclass(frozen=True)
class AnnotationRecord:
    image_path: str
    width: int
    height: int
    quad: Quad
    annotator_id: str | None = None


def parse_annotation_line(line: str, path: str | None = None, lineno: int | None = None) -> AnnotationRecord:
    fields = line.rstrip("\n").split("\t")
    if len(fields) not in (7, 8):
        raise ParseError(
            f"expected 7 or 8 tab-separated fields, got {len(fields)}",
            path=path,
            line=lineno,
        )
    image_path = fields[0]
    if not image_path:
        raise ParseError("empty image path", path=path, line=lineno)
    try:
        width = int(fields[1])
        height = int(fields[2])
    except ValueError as e:
        raise ParseError(f"bad dimensions: {e}", path=path, line=lineno) from e
    if width <= 0 or height <= 0:
        raise ParseError("dimensions must be positive", path=path, line=lineno)
    corners = []
    for f in fields[3:7]:
        parts = f.split(",")
        if len(parts) != 2:
            raise ParseError(f"corner {f!r} is not x,y", path=path, line=lineno)
        try:
            corners.append((float(parts[0]), float(parts[1])))
        except ValueError as e:
            raise ParseError(f"bad corner {f!r}", path=path, line=lineno) from e
    try:
        quad = canonicalize(corners)
    except ValueError as e:
        raise ParseError(str(e), path=path, line=lineno) from e
    annotator = fields[7] if len(fields) == 8 and fields[7] else None
    return AnnotationRecord(image_path, width, height, quad, annotator)


def format_annotation_line(record: AnnotationRecord) -> str:
    corners = "\t".join(f"{p.x!r},{p.y!r}" for p in record.quad.corners)
    line = f"{record.image_path}\t{record.width}\t{record.height}\t{corners}"
    if record.annotator_id is not None:
        line += f"\t{record.annotator_id}"
    return line


def load_annotations(path) -> list[AnnotationRecord]:
    """Parse an annotation file; records come back in file order."""
    path = Path(path)
    records = []
    seen = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            record = parse_annotation_line(line, path=str(path), lineno=lineno)
            if record.image_path in seen:
                raise ParseError(
                    f"duplicate image path {record.image_path!r}",
                    path=str(path),
                    line=lineno,
                )
            seen.add(record.image_path)
            records.append(record)
    return records


def save_annotations(path, records) -> None:
    text = "".join(format_annotation_line(r) + "\n" for r in records)
    atomic_write_text(path, text)


def load_record_image(record: AnnotationRecord, images_dir=None) -> np.ndarray:
    """Load the image a record points to, relative to images_dir if given."""
    p = Path(record.image_path)
    if images_dir is not None and not p.is_absolute():
        p = Path(images_dir) / p
    return read_image(p)


def _as_rgb(img: np.ndarray) -> np.ndarray:
    if img.ndim == 2:
        return np.stack([img] * 3, axis=-1)
    if img.ndim == 3 and img.shape[2] == 3:
        return img
    raise ShapeMismatch(f"expected grayscale or RGB image, got shape {img.shape}")


def normalize_image(img: np.ndarray, size: int = 256) -> np.ndarray:
    """Resize to size x size and map intensities to [-0.5, 0.5]; (3, s, s) out."""
    rgb = _as_rgb(np.asarray(img))
    resized = resize_bilinear(rgb, size, size).astype(float)
    return resized.transpose(2, 0, 1) / 255.0 - 0.5


@dataclass(frozen=True)
class Sample:
    """One network-ready training example."""

    input: np.ndarray  # (3, s, s) float in [-0.5, 0.5]
    target: np.ndarray  # (s, s) bool
    meta: AnnotationRecord


def preprocess(img: np.ndarray, ann: AnnotationRecord, size: int = 256) -> Sample:
    """Resize, normalize, and rasterize the scaled annotation as the target.

    The target is rasterized from the quad scaled into the size x size
    frame (rather than resampling a full-resolution mask), which keeps the
    labels exactly reproducible under the pixel-center rule.
    """
    img = np.asarray(img)
    if img.shape[0] != ann.height or img.shape[1] != ann.width:
        raise ShapeMismatch(
            f"image is {img.shape[0]}x{img.shape[1]} but record says "
            f"{ann.height}x{ann.width}"
        )
    x = normalize_image(img, size)
    scaled = ann.quad.scaled(size / ann.width, size / ann.height)
    target = rasterize_quad(scaled, size, size)
    return Sample(x, target, ann)


def build_samples(records, images_dir=None, size: int = 256) -> list[Sample]:
    return [preprocess(load_record_image(r, images_dir), r, size) for r in records]


def split(records, fractions, seed: int):
    """Seeded shuffle, then contiguous partition by cumulative fractions.

    Returns one list per fraction; the partitions are disjoint and their
    union in total size follows floor(cumsum(fractions) * n).
    """
    records = list(records)
    if not records:
        raise EmptyDataset("cannot split an empty record list")
    fractions = tuple(float(f) for f in fractions)
    if not fractions or any(f <= 0 for f in fractions):
        raise ValueError("fractions must be positive")
    if sum(fractions) > 1.0 + 1e-9:
        raise ValueError("fractions must sum to at most 1")
    order = np.random.default_rng(seed).permutation(len(records))
    shuffled = [records[i] for i in order]
    bounds = [int(np.floor(c * len(records))) for c in np.cumsum(fractions)]
    parts = []
    start = 0
    for b in bounds:
        parts.append(shuffled[start:b])
        start = b
    return tuple(parts)
