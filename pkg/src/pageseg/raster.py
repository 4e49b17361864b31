"""Binary-mask operations: thresholding, components, holes, rasterization.

Masks are 2D bool arrays; probability maps are 2D float arrays in [0, 1].
Foreground components use 8-connectivity, background (for hole filling)
uses 4-connectivity, the standard complementary pair.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import ShapeMismatch
from .geometry import Quad, points_in_quad

__all__ = [
    "threshold",
    "largest_component",
    "fill_holes",
    "rasterize_quad",
    "resize_bilinear",
]

_EIGHT = np.ones((3, 3), dtype=int)


def threshold(p: np.ndarray, t: float) -> np.ndarray:
    """Binarize a probability map; a value exactly equal to t is foreground."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {t}")
    p = np.asarray(p, dtype=float)
    if p.ndim != 2:
        raise ShapeMismatch(f"probability map must be 2D, got shape {p.shape}")
    return p >= t


def largest_component(m: np.ndarray) -> np.ndarray:
    """Keep only the 8-connected foreground component with the most pixels.

    Ties go to the component whose earliest pixel comes first in row-major
    scan order.  An all-background mask is returned unchanged.
    """
    m = np.asarray(m, dtype=bool)
    labels, count = ndimage.label(m, structure=_EIGHT)
    if count == 0:
        return m.copy()
    if count == 1:
        return m.copy()
    flat = labels.ravel()
    sizes = np.bincount(flat)[1:]
    best_size = sizes.max()
    candidates = np.flatnonzero(sizes == best_size) + 1
    if len(candidates) == 1:
        keep = candidates[0]
    else:
        first_index = {
            int(lab): int(np.argmax(flat == lab)) for lab in candidates
        }
        keep = min(candidates, key=lambda lab: first_index[int(lab)])
    return labels == keep


def fill_holes(m: np.ndarray) -> np.ndarray:
    """Turn background regions not 4-connected to the border into foreground."""
    m = np.asarray(m, dtype=bool)
    bg_labels, count = ndimage.label(~m)  # default structure is 4-connected
    if count == 0:
        return m.copy()
    border = np.zeros(count + 1, dtype=bool)
    border[bg_labels[0, :]] = True
    border[bg_labels[-1, :]] = True
    border[bg_labels[:, 0]] = True
    border[bg_labels[:, -1]] = True
    border[0] = True  # label 0 is foreground, never a hole
    return m | ~border[bg_labels]


def rasterize_quad(q: Quad, height: int, width: int) -> np.ndarray:
    """Mask of pixels whose centers fall inside or on q (center at x=col, y=row)."""
    if height <= 0 or width <= 0:
        raise ValueError("target dimensions must be positive")
    xs = np.arange(width, dtype=float)[None, :]
    ys = np.arange(height, dtype=float)[:, None]
    return points_in_quad(q, xs, ys)


def _src_coords(n_out: int, n_in: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gather indices and weights mapping output pixel centers into the source.

    Uses the half-pixel convention (edge centers map proportionally, no
    corner alignment) with clamping at the borders.
    """
    src = (np.arange(n_out, dtype=float) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    i0 = np.floor(src).astype(int)
    frac = src - i0
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, frac


def resize_bilinear(img: np.ndarray, new_height: int, new_width: int) -> np.ndarray:
    """Bilinear resize of a (H, W) or (H, W, C) image.

    Returns float64 except for the identity case, which returns an exact
    copy of the input.
    """
    if new_height <= 0 or new_width <= 0:
        raise ValueError("target dimensions must be positive")
    img = np.asarray(img)
    if img.ndim not in (2, 3):
        raise ShapeMismatch(f"expected 2D or 3D image, got shape {img.shape}")
    h, w = img.shape[:2]
    if (h, w) == (new_height, new_width):
        return img.copy()
    data = img.astype(np.float64, copy=False)
    r0, r1, rf = _src_coords(new_height, h)
    c0, c1, cf = _src_coords(new_width, w)
    if img.ndim == 3:
        rf = rf[:, None, None]
        cf = cf[None, :, None]
    else:
        rf = rf[:, None]
        cf = cf[None, :]
    rows = data[r0] * (1.0 - rf) + data[r1] * rf
    return rows[:, c0] * (1.0 - cf) + rows[:, c1] * cf
