"""Seeded synthetic document images for desk-scale experiments.

Each image is a light page quadrilateral on a darker background with faux
text strokes, optionally decorated with the usual kinds of border noise: a
dark book-edge strip beside the page, a partial neighboring page touching
an image border, and an overlay document on top of the page (in which case
the overlay, not the page, is the annotated region).  Generation is fully
deterministic for a fixed seed: one sequential random stream drives all
draws, so the same spec always produces bit-identical images and records.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .dataset import AnnotationRecord
from .geometry import Quad, canonicalize
from .image_io import atomic_write_text
from .raster import rasterize_quad

__all__ = ["SyntheticSpec", "generate_synthetic", "load_spec", "save_spec"]


@dataclass(frozen=True)
class SyntheticSpec:
    image_size: int = 64
    page_fill: tuple[float, float] = (150.0, 230.0)
    background: tuple[float, float] = (20.0, 90.0)
    p_book_edge: float = 0.0
    p_partial_page: float = 0.0
    p_overlay: float = 0.0
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("p_book_edge", "p_partial_page", "p_overlay"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if self.image_size < 16:
            raise ValueError("image_size must be at least 16")

    def to_json(self) -> str:
        d = asdict(self)
        d["page_fill"] = list(self.page_fill)
        d["background"] = list(self.background)
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SyntheticSpec":
        d = json.loads(text)
        d["page_fill"] = tuple(d["page_fill"])
        d["background"] = tuple(d["background"])
        return cls(**d)


def load_spec(path) -> SyntheticSpec:
    return SyntheticSpec.from_json(Path(path).read_text(encoding="utf-8"))


def save_spec(path, spec: SyntheticSpec) -> None:
    atomic_write_text(path, spec.to_json())


def _draw_quad(canvas: np.ndarray, quad: Quad, value: float) -> None:
    mask = rasterize_quad(quad, canvas.shape[0], canvas.shape[1])
    canvas[mask] = value


def _draw_strokes(canvas, rng, x0, x1, y0, y1, count, value) -> None:
    """Short dark horizontal segments, a cheap stand-in for text lines."""
    if x1 - x0 < 4 or y1 - y0 < 2:
        return
    for _ in range(count):
        y = int(rng.integers(y0, y1))
        sx = int(rng.integers(x0, max(x0 + 1, x1 - 3)))
        ex = int(rng.integers(sx + 2, x1))
        canvas[y, sx:ex] = value


def _page_quad(rng, s: int) -> tuple[Quad, int]:
    """A jittered near-rectangular page with one wide-margin 'noise side'."""
    noise_side = int(rng.integers(0, 4))  # 0 left, 1 right, 2 top, 3 bottom
    margins = rng.uniform(0.015, 0.05, size=4) * s
    margins[noise_side] = rng.uniform(0.08, 0.16) * s
    left, right, top, bottom = margins
    base = [
        (left, top),
        (s - right, top),
        (s - right, s - bottom),
        (left, s - bottom),
    ]
    # Scanned pages sit nearly axis-aligned: mild per-corner jitter, rounded
    # to whole pixels the way click-based annotations are.
    jitter = rng.uniform(-0.008, 0.008, size=(4, 2)) * s
    corners = np.rint(np.asarray(base) + jitter)
    return canonicalize(corners), noise_side


def _bbox(quad: Quad) -> tuple[float, float, float, float]:
    xs = [p.x for p in quad.corners]
    ys = [p.y for p in quad.corners]
    return min(xs), min(ys), max(xs), max(ys)


def _side_gap(side: int, bbox, s: int) -> float:
    x0, y0, x1, y1 = bbox
    return (x0, s - x1, y0, s - y1)[side]


def _side_strip(side: int, s: int, near: float, far: float) -> Quad:
    """Axis-aligned strip spanning the frame along one side.

    near/far are distances from that side's border; near < far.
    """
    if side == 0:
        corners = [(near, 0), (far, 0), (far, s), (near, s)]
    elif side == 1:
        corners = [(s - far, 0), (s - near, 0), (s - near, s), (s - far, s)]
    elif side == 2:
        corners = [(0, near), (s, near), (s, far), (0, far)]
    else:
        corners = [(0, s - far), (s, s - far), (s, s - near), (0, s - near)]
    return canonicalize(corners)


def generate_synthetic(spec: SyntheticSpec, n: int) -> list[tuple[np.ndarray, AnnotationRecord]]:
    """Generate n (image, record) pairs; images are (s, s, 3) uint8."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(spec.seed)
    s = spec.image_size
    out = []
    for i in range(n):
        bg_v = rng.uniform(*spec.background)
        page_v = rng.uniform(*spec.page_fill)
        want_book = rng.uniform() < spec.p_book_edge
        want_partial = rng.uniform() < spec.p_partial_page
        want_overlay = rng.uniform() < spec.p_overlay

        page, noise_side = _page_quad(rng, s)
        bbox = _bbox(page)
        gap = _side_gap(noise_side, bbox, s)
        canvas = np.full((s, s), bg_v)

        if want_book and gap >= 2.0:
            # Dark spine hugging the page on the wide-margin side.
            width = rng.uniform(0.2, 0.45) * gap
            book = _side_strip(noise_side, s, gap - width, gap)
            _draw_quad(canvas, book, rng.uniform(2.0, 28.0))

        partial = None
        if want_partial and gap >= 2.0:
            # Neighboring page touching the border, clear of the main page.
            width = max(1.0, min(0.4 * gap, gap - 1.2))
            partial = _side_strip(noise_side, s, 0.0, width)
            _draw_quad(canvas, partial, rng.uniform(*spec.page_fill))

        _draw_quad(canvas, page, page_v)

        annotated = page
        if want_overlay:
            x0, y0, x1, y1 = bbox
            insets = rng.uniform(0.15, 0.32, size=4)
            ov = canonicalize(
                np.rint(
                    [
                        (x0 + insets[0] * (x1 - x0), y0 + insets[2] * (y1 - y0)),
                        (x1 - insets[1] * (x1 - x0), y0 + insets[2] * (y1 - y0)),
                        (x1 - insets[1] * (x1 - x0), y1 - insets[3] * (y1 - y0)),
                        (x0 + insets[0] * (x1 - x0), y1 - insets[3] * (y1 - y0)),
                    ]
                )
            )
            _draw_quad(canvas, ov, min(255.0, page_v + rng.uniform(15.0, 40.0)))
            annotated = ov

        # Text inside whatever region is the annotation target.
        ax0, ay0, ax1, ay1 = _bbox(annotated)
        pad_x = 0.18 * (ax1 - ax0)
        pad_y = 0.15 * (ay1 - ay0)
        _draw_strokes(
            canvas,
            rng,
            int(np.ceil(ax0 + pad_x)),
            int(np.floor(ax1 - pad_x)),
            int(np.ceil(ay0 + pad_y)),
            int(np.floor(ay1 - pad_y)),
            count=int(rng.integers(3, 8)),
            value=rng.uniform(5.0, 60.0),
        )
        if partial is not None:
            px0, py0, px1, py1 = _bbox(partial)
            _draw_strokes(
                canvas,
                rng,
                int(np.ceil(px0 + 1)),
                int(np.floor(px1 - 1)),
                int(np.ceil(py0 + 0.1 * s)),
                int(np.floor(py1 - 0.1 * s)),
                count=int(rng.integers(2, 5)),
                value=rng.uniform(5.0, 60.0),
            )

        if spec.noise > 0:
            canvas = canvas + rng.normal(0.0, spec.noise, size=canvas.shape)
        img = np.clip(np.rint(canvas), 0, 255).astype(np.uint8)
        img = np.stack([img] * 3, axis=-1)

        record = AnnotationRecord(f"synth_{i:05d}.png", s, s, annotated)
        out.append((img, record))
    return out
