"""Exact planar geometry for quadrilateral page regions.

Coordinates follow image conventions: x grows to the right, y grows
downward, and the pixel at (row, col) has its center at the point
(x=col, y=row).  With y pointing down, a polygon whose shoelace sum is
positive is traversed clockwise on screen; that is the canonical corner
order used throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Point",
    "Quad",
    "OrientedRect",
    "canonicalize",
    "canonical_rotation",
    "polygon_area",
    "quad_iou",
    "convex_hull",
    "mask_quad_iou",
    "points_in_quad",
    "is_convex",
]


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __iter__(self):
        yield self.x
        yield self.y


@dataclass(frozen=True)
class Quad:
    """Four corners; canonical instances are clockwise on screen (y down),
    starting at the corner nearest the origin among the topmost corners."""

    corners: tuple[Point, Point, Point, Point]

    def __post_init__(self):
        if len(self.corners) != 4:
            raise ValueError("a Quad has exactly 4 corners")

    def to_array(self) -> np.ndarray:
        """Corners as a (4, 2) float array of (x, y) rows."""
        return np.array([(p.x, p.y) for p in self.corners], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "Quad":
        """Build a Quad from 4 (x, y) rows, preserving the given order."""
        a = np.asarray(arr, dtype=float)
        if a.shape != (4, 2):
            raise ValueError(f"expected (4, 2) corner array, got {a.shape}")
        return cls(tuple(Point(float(x), float(y)) for x, y in a))

    def translated(self, dx: float, dy: float) -> "Quad":
        return Quad(tuple(Point(p.x + dx, p.y + dy) for p in self.corners))

    def scaled(self, sx: float, sy: float) -> "Quad":
        return Quad(tuple(Point(p.x * sx, p.y * sy) for p in self.corners))


def _shoelace(pts: Sequence[Point]) -> float:
    """Twice the signed area; positive for clockwise-on-screen order."""
    total = 0.0
    n = len(pts)
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        total += a.x * b.y - b.x * a.y
    return total


def _canonical_start(pts: Sequence[Point]) -> int:
    """Index of the corner nearest the origin among the topmost corners."""
    min_y = min(p.y for p in pts)
    best = None
    best_key = None
    for i, p in enumerate(pts):
        if p.y != min_y:
            continue
        key = (p.x * p.x + p.y * p.y, p.x)
        if best_key is None or key < best_key:
            best, best_key = i, key
    return best


def canonicalize(corners: Iterable) -> Quad:
    """Order 4 points into the canonical Quad.

    Points are sorted by angle around their centroid, which yields a simple
    (non-self-intersecting) polygon, oriented clockwise on screen, then
    rotated to start at the canonical corner.  Degenerate inputs (repeated
    or collinear points) produce a degenerate Quad rather than an error.
    Applying canonicalize to its own output is the identity.
    """
    pts = []
    for c in corners:
        if isinstance(c, Point):
            x, y = c.x, c.y
        else:
            x, y = c
        x, y = float(x), float(y)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError("corner coordinates must be finite")
        pts.append(Point(x, y))
    if len(pts) != 4:
        raise ValueError("canonicalize requires exactly 4 points")

    cx = sum(p.x for p in pts) / 4.0
    cy = sum(p.y for p in pts) / 4.0
    # Ascending atan2 around the centroid is clockwise on screen (y down);
    # radius/x/y tiebreaks keep the sort deterministic for coincident angles.
    pts.sort(
        key=lambda p: (
            math.atan2(p.y - cy, p.x - cx),
            (p.x - cx) ** 2 + (p.y - cy) ** 2,
            p.x,
            p.y,
        )
    )
    if _shoelace(pts) < 0:
        pts = [pts[0]] + pts[:0:-1]
    start = _canonical_start(pts)
    pts = pts[start:] + pts[:start]
    return Quad(tuple(pts))


def canonical_rotation(q: Quad) -> Quad:
    """Canonicalize a Quad without changing its cyclic corner order.

    Unlike :func:`canonicalize`, this preserves the polygon exactly (it only
    reverses orientation and rotates the start corner), so it is safe for
    quads that may have become concave, e.g. during corner refinement.
    """
    pts = list(q.corners)
    if _shoelace(pts) < 0:
        pts = [pts[0]] + pts[:0:-1]
    start = _canonical_start(pts)
    pts = pts[start:] + pts[:start]
    return Quad(tuple(pts))


def polygon_area(q: Quad) -> float:
    """Absolute area of the quad by the shoelace formula."""
    return abs(_shoelace(q.corners)) / 2.0


def is_convex(q: Quad) -> bool:
    """True when every turn along the boundary has the same (nonzero) sign."""
    pts = q.corners
    signs = set()
    for i in range(4):
        a, b, c = pts[i], pts[(i + 1) % 4], pts[(i + 2) % 4]
        cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x)
        if cross != 0.0:
            signs.add(cross > 0.0)
    return len(signs) == 1


def _clip_convex(subject: list[tuple[float, float]], clip: Quad) -> list[tuple[float, float]]:
    """Sutherland-Hodgman clip of a polygon against a convex canonical quad."""
    output = subject
    cpts = clip.corners
    for i in range(4):
        c1, c2 = cpts[i], cpts[(i + 1) % 4]
        ex, ey = c2.x - c1.x, c2.y - c1.y
        if not output:
            break
        inp = output
        output = []
        sx, sy = inp[-1]
        s_in = ex * (sy - c1.y) - ey * (sx - c1.x) >= 0.0
        for px, py in inp:
            p_in = ex * (py - c1.y) - ey * (px - c1.x) >= 0.0
            if p_in != s_in:
                # Segment crosses the clipping line; add the intersection.
                # A zero denominator means the segment is numerically
                # collinear with the edge; the crossing is then an
                # epsilon-wide sliver and is skipped.
                dx, dy = px - sx, py - sy
                denom = ex * dy - ey * dx
                if denom != 0.0:
                    t = (ex * (c1.y - sy) - ey * (c1.x - sx)) / denom
                    output.append((sx + t * dx, sy + t * dy))
            if p_in:
                output.append((px, py))
            sx, sy, s_in = px, py, p_in
    return output


def _poly_area(pts: list[tuple[float, float]]) -> float:
    total = 0.0
    n = len(pts)
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        total += x1 * y2 - x2 * y1
    return abs(total) / 2.0


def quad_iou(a: Quad, b: Quad) -> float:
    """Intersection over union of two convex canonical quads.

    Computed by exact convex polygon clipping.  The result is 0 when the
    union has zero area.  The pair is ordered internally before clipping so
    that quad_iou(a, b) == quad_iou(b, a) bit-for-bit.
    """
    ka = tuple((p.x, p.y) for p in a.corners)
    kb = tuple((p.x, p.y) for p in b.corners)
    if kb < ka:
        a, b = b, a
    area_a = polygon_area(a)
    area_b = polygon_area(b)
    if area_a == 0.0 or area_b == 0.0:
        return 0.0
    inter_pts = _clip_convex([(p.x, p.y) for p in a.corners], b)
    inter = _poly_area(inter_pts) if len(inter_pts) >= 3 else 0.0
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    return min(1.0, inter / union)


def convex_hull(points: Iterable) -> list[Point]:
    """Convex hull by monotone chain.

    Returns hull vertices with positive shoelace orientation (clockwise on
    screen with y down), with no three consecutive collinear vertices.
    Collinear inputs degenerate to their two extreme points; a single point
    returns itself.
    """
    pts = []
    for c in points:
        if isinstance(c, Point):
            pts.append((c.x, c.y))
        else:
            pts.append((float(c[0]), float(c[1])))
    if not pts:
        raise ValueError("convex_hull requires at least one point")
    pts = sorted(set(pts))
    if len(pts) == 1:
        return [Point(*pts[0])]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    return [Point(x, y) for x, y in hull]


def points_in_quad(q: Quad, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Membership test for arrays of points against a simple quad.

    A point belongs to the quad iff it is strictly inside (even-odd rule)
    or exactly on the boundary.  Zero-area quads contain nothing.  px and
    py must broadcast against each other.
    """
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    shape = np.broadcast_shapes(px.shape, py.shape)
    if polygon_area(q) == 0.0:
        return np.zeros(shape, dtype=bool)
    inside = np.zeros(shape, dtype=bool)
    on_edge = np.zeros(shape, dtype=bool)
    pts = q.corners
    for i in range(4):
        a, b = pts[i], pts[(i + 1) % 4]
        x1, y1, x2, y2 = a.x, a.y, b.x, b.y
        cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
        on_seg = (
            (cross == 0.0)
            & (px >= min(x1, x2))
            & (px <= max(x1, x2))
            & (py >= min(y1, y2))
            & (py <= max(y1, y2))
        )
        on_edge |= on_seg
        # Half-open crossing rule, kept in multiplied form so integer-valued
        # coordinates are evaluated exactly.
        straddles = (y1 > py) != (y2 > py)
        dy = y2 - y1
        lhs = (px - x1) * dy
        rhs = (py - y1) * (x2 - x1)
        if dy > 0:
            inside ^= straddles & (lhs < rhs)
        elif dy < 0:
            inside ^= straddles & (lhs > rhs)
    return inside | on_edge


def mask_quad_iou(mask: np.ndarray, q: Quad) -> float:
    """IoU between a mask's foreground and the pixels whose centers lie in q.

    The mask and quad share one coordinate frame: pixel (row, col) sits at
    point (x=col, y=row).  Returns 0 when the union is empty.
    """
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    xs = np.arange(w, dtype=float)[None, :]
    ys = np.arange(h, dtype=float)[:, None]
    inside = points_in_quad(q, xs, ys)
    union = int(np.count_nonzero(mask | inside))
    if union == 0:
        return 0.0
    inter = int(np.count_nonzero(mask & inside))
    return inter / union


@dataclass(frozen=True)
class OrientedRect:
    """Rectangle at an arbitrary orientation.

    width is the extent along (cos angle, sin angle), height along the
    perpendicular; angle is normalized to [0, pi/2).
    """

    center: Point
    width: float
    height: float
    angle: float

    def to_quad(self) -> Quad:
        ux, uy = math.cos(self.angle), math.sin(self.angle)
        vx, vy = -uy, ux
        hw, hh = self.width / 2.0, self.height / 2.0
        cx, cy = self.center.x, self.center.y
        corners = [
            (cx - hw * ux - hh * vx, cy - hw * uy - hh * vy),
            (cx + hw * ux - hh * vx, cy + hw * uy - hh * vy),
            (cx + hw * ux + hh * vx, cy + hw * uy + hh * vy),
            (cx - hw * ux + hh * vx, cy - hw * uy + hh * vy),
        ]
        return canonicalize(corners)
