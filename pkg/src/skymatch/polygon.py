"""Convex 2D polygon primitives: hull, clipping, areas.

Vertices are counter-clockwise (x, y) pairs in meters.  The clipping path is
hot (it runs once per footprint intersection test), so the internals work on
plain tuple lists rather than numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


class DegenerateGeometryError(ValueError):
    """Raised when points are too collinear/coincident to form a polygon."""


def _shoelace(pts) -> float:
    """Signed area; positive for counter-clockwise vertex order."""
    total = 0.0
    n = len(pts)
    for k in range(n):
        x0, y0 = pts[k]
        x1, y1 = pts[(k + 1) % n]
        total += x0 * y1 - x1 * y0
    return 0.5 * total


@dataclass(frozen=True)
class ConvexPolygon:
    vertices: np.ndarray  # (n, 2), CCW

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3 or not np.all(np.isfinite(v)):
            raise DegenerateGeometryError("polygon needs >= 3 finite 2D vertices")
        pts = [tuple(p) for p in v]
        if _shoelace(pts) <= 0.0:
            raise DegenerateGeometryError("vertices must wind counter-clockwise with positive area")
        # Convexity up to collinearity slack, scaled so meter-sized and
        # kilometer-sized footprints tolerate the same relative rounding.
        scale = max(1.0, float(np.max(np.abs(v))))
        tol = 1e-9 * scale * scale
        n = len(pts)
        for k in range(n):
            ax, ay = pts[k]
            bx, by = pts[(k + 1) % n]
            cx, cy = pts[(k + 2) % n]
            cross = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
            if cross < -tol:
                raise DegenerateGeometryError("vertices are not convex in CCW order")
        frozen = np.array(v, dtype=float)
        frozen.setflags(write=False)
        object.__setattr__(self, "vertices", frozen)

    @cached_property
    def area(self) -> float:
        return _shoelace([tuple(p) for p in self.vertices])

    @cached_property
    def centroid(self) -> np.ndarray:
        pts = [tuple(p) for p in self.vertices]
        a = self.area
        cx = cy = 0.0
        n = len(pts)
        for k in range(n):
            x0, y0 = pts[k]
            x1, y1 = pts[(k + 1) % n]
            w = x0 * y1 - x1 * y0
            cx += (x0 + x1) * w
            cy += (y0 + y1) * w
        return np.array([cx / (6.0 * a), cy / (6.0 * a)])

    @cached_property
    def bounds(self) -> tuple[float, float, float, float]:
        """Axis-aligned envelope (xmin, ymin, xmax, ymax)."""
        v = self.vertices
        return (float(v[:, 0].min()), float(v[:, 1].min()),
                float(v[:, 0].max()), float(v[:, 1].max()))

    def contains(self, point, tol: float = 0.0) -> bool:
        """Point in polygon via half-plane tests; tol > 0 loosens the boundary."""
        x, y = float(point[0]), float(point[1])
        pts = self.vertices
        n = len(pts)
        for k in range(n):
            ax, ay = pts[k]
            bx, by = pts[(k + 1) % n]
            if (bx - ax) * (y - ay) - (by - ay) * (x - ax) < -tol:
                return False
        return True


def convex_hull(points) -> ConvexPolygon:
    """Monotone-chain convex hull; collinear boundary points are dropped."""
    pts = sorted({(float(p[0]), float(p[1])) for p in np.asarray(points, dtype=float)})
    if len(pts) < 3:
        raise DegenerateGeometryError("hull needs at least 3 distinct points")
    scale = max(1.0, max(max(abs(x), abs(y)) for x, y in pts))
    tol = 1e-9 * scale * scale

    def build(seq):
        chain = []
        for p in seq:
            while len(chain) >= 2:
                ax, ay = chain[-2]
                bx, by = chain[-1]
                if (bx - ax) * (p[1] - ay) - (by - ay) * (p[0] - ax) <= tol:
                    chain.pop()
                else:
                    break
            chain.append(p)
        return chain

    lower = build(pts)
    upper = build(reversed(pts))
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateGeometryError("all points are collinear")
    return ConvexPolygon(np.array(hull))


def _clip(subject: list[tuple[float, float]], clip: list[tuple[float, float]]):
    """Sutherland-Hodgman clip of a convex subject by a convex CCW clip path."""
    output = subject
    n = len(clip)
    for k in range(n):
        if not output:
            return []
        ax, ay = clip[k]
        bx, by = clip[(k + 1) % n]
        ex, ey = bx - ax, by - ay
        inp = output
        output = []
        px, py = inp[-1]
        p_in = ex * (py - ay) - ey * (px - ax) >= 0.0
        for cx, cy in inp:
            c_in = ex * (cy - ay) - ey * (cx - ax) >= 0.0
            if c_in != p_in:
                dx, dy = cx - px, cy - py
                denom = ex * dy - ey * dx
                if denom != 0.0:
                    t = (ex * (ay - py) - ey * (ax - px)) / denom
                    output.append((px + t * dx, py + t * dy))
            if c_in:
                output.append((cx, cy))
            px, py, p_in = cx, cy, c_in
    return output


def _dedupe(pts, tol: float):
    out = []
    for p in pts:
        if not out or abs(p[0] - out[-1][0]) > tol or abs(p[1] - out[-1][1]) > tol:
            out.append(p)
    if len(out) > 1 and abs(out[0][0] - out[-1][0]) <= tol and abs(out[0][1] - out[-1][1]) <= tol:
        out.pop()
    return out


def convex_intersection_area(a: ConvexPolygon, b: ConvexPolygon) -> tuple[ConvexPolygon | None, float]:
    """Intersection polygon and its area; (None, 0.0) when empty."""
    pts = _clip([tuple(p) for p in a.vertices], [tuple(p) for p in b.vertices])
    if len(pts) < 3:
        return None, 0.0
    scale = max(1.0, max(max(abs(x), abs(y)) for x, y in pts))
    pts = _dedupe(pts, 1e-12 * scale)
    if len(pts) < 3:
        return None, 0.0
    area = _shoelace(pts)
    if area <= 0.0:
        return None, 0.0
    return ConvexPolygon(np.array(pts)), area


def intersection_area_fast(subject_pts, clip_pts) -> float:
    """Area-only variant of convex_intersection_area on raw vertex lists."""
    pts = _clip(subject_pts, clip_pts)
    if len(pts) < 3:
        return 0.0
    return max(0.0, _shoelace(pts))
