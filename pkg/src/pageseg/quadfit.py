"""Mask-to-quadrilateral post-processing.

The chain mirrors the four cleanup steps used at inference time: threshold
the probability map, keep the largest component, fill holes, fit a minimum
area oriented rectangle over the foreground, then greedily nudge corners to
maximize IoU against the predicted pixels.  All of it runs at the map's own
resolution; quads are upscaled to original image coordinates afterwards.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import EmptyMask
from .geometry import (
    OrientedRect,
    Point,
    Quad,
    canonical_rotation,
    convex_hull,
    mask_quad_iou,
)
from .raster import fill_holes, largest_component, threshold

__all__ = [
    "min_area_rect",
    "min_area_rect_points",
    "refine_quad",
    "refine_quad_with_trace",
    "extract_quad",
    "upscale_quad",
]

_HALF_PI = math.pi / 2.0


def _normalize_rect(cx, cy, width, height, angle) -> OrientedRect:
    """Fold the angle into [0, pi/2), swapping extents per quarter turn."""
    q = math.floor(angle / _HALF_PI)
    angle = angle - q * _HALF_PI
    if angle >= _HALF_PI:  # guard against rounding at the boundary
        angle -= _HALF_PI
        q += 1
    if q % 2 != 0:
        width, height = height, width
    return OrientedRect(Point(cx, cy), width, height, angle)


def min_area_rect_points(points) -> OrientedRect:
    """Minimum-area oriented bounding rectangle of a point set.

    Rotating calipers over the convex hull: one edge-aligned candidate per
    hull edge, keeping the first strict minimum.  Degenerate hulls (single
    point, collinear points) produce rectangles with zero height.
    """
    hull = convex_hull(points)
    if len(hull) == 1:
        p = hull[0]
        return OrientedRect(p, 0.0, 0.0, 0.0)
    xs = np.array([p.x for p in hull])
    ys = np.array([p.y for p in hull])
    n = len(hull)
    best = None
    for i in range(n):
        j = (i + 1) % n
        ex, ey = xs[j] - xs[i], ys[j] - ys[i]
        norm = math.hypot(ex, ey)
        if norm == 0.0:
            continue
        ux, uy = ex / norm, ey / norm
        # Projections onto the edge direction and its perpendicular.
        s = xs * ux + ys * uy
        t = -xs * uy + ys * ux
        s0, s1 = s.min(), s.max()
        t0, t1 = t.min(), t.max()
        area = (s1 - s0) * (t1 - t0)
        if best is None or area < best[0]:
            best = (area, ux, uy, s0, s1, t0, t1)
    if best is None:  # all hull points coincide
        return OrientedRect(hull[0], 0.0, 0.0, 0.0)
    _, ux, uy, s0, s1, t0, t1 = best
    sm, tm = (s0 + s1) / 2.0, (t0 + t1) / 2.0
    cx = sm * ux - tm * uy
    cy = sm * uy + tm * ux
    return _normalize_rect(cx, cy, s1 - s0, t1 - t0, math.atan2(uy, ux))


def min_area_rect(m: np.ndarray) -> OrientedRect:
    """Minimum-area oriented rectangle enclosing all foreground pixel centers."""
    m = np.asarray(m, dtype=bool)
    rows, cols = np.nonzero(m)
    if rows.size == 0:
        raise EmptyMask("mask has no foreground pixels")
    pts = np.stack([cols, rows], axis=1).astype(float)  # (x, y) pairs
    return min_area_rect_points(pts)


_MOVES = tuple(
    (corner, dx, dy)
    for corner in range(4)
    for dx, dy in ((-1.0, 0.0), (1.0, 0.0), (0.0, -1.0), (0.0, 1.0))
)


def refine_quad_with_trace(m: np.ndarray, q0: Quad) -> tuple[Quad, list[float]]:
    """Greedy corner refinement, returning the quad and its IoU trace.

    Each iteration scores the 16 single-pixel corner moves (4 corners x 4
    axis directions) and applies the best one if it strictly improves the
    mask IoU; ties between equally good moves go to the earliest in
    enumeration order.  Stops at a local optimum or after 4*(h+w) accepted
    moves.  The trace is non-decreasing by construction.
    """
    m = np.asarray(m, dtype=bool)
    h, w = m.shape
    current = q0
    current_iou = mask_quad_iou(m, current)
    trace = [current_iou]
    for _ in range(4 * (h + w)):
        best_move = None
        best_iou = current_iou
        corners = current.corners
        for ci, dx, dy in _MOVES:
            p = corners[ci]
            cand_corners = list(corners)
            cand_corners[ci] = Point(p.x + dx, p.y + dy)
            cand = Quad(tuple(cand_corners))
            iou = mask_quad_iou(m, cand)
            if iou > best_iou:
                best_iou = iou
                best_move = cand
        if best_move is None:
            break
        current = best_move
        current_iou = best_iou
        trace.append(current_iou)
        assert trace[-1] >= trace[-2]
    assert current_iou >= trace[0]
    return canonical_rotation(current), trace


def refine_quad(m: np.ndarray, q0: Quad) -> Quad:
    """Greedy corner refinement; see refine_quad_with_trace."""
    return refine_quad_with_trace(m, q0)[0]


def extract_quad(p: np.ndarray, t: float = 0.5) -> Quad:
    """Full post-processing: probability map in, refined quad out.

    Raises EmptyMask when thresholding yields no foreground (callers may
    substitute a full-image quad).
    """
    mask = threshold(p, t)
    if not mask.any():
        raise EmptyMask("no pixel reached the threshold")
    mask = fill_holes(largest_component(mask))
    rect = min_area_rect(mask)
    return refine_quad(mask, rect.to_quad())


def upscale_quad(q: Quad, from_hw: tuple[int, int], to_hw: tuple[int, int]) -> Quad:
    """Scale a quad between coordinate frames, corner-wise.

    Scaling is by (to_w / from_w, to_h / from_h); the canonical order is
    preserved because both factors are positive.
    """
    fh, fw = from_hw
    th, tw = to_hw
    if min(fh, fw, th, tw) <= 0:
        raise ValueError("frame dimensions must be positive")
    return q.scaled(tw / fw, th / fh)
