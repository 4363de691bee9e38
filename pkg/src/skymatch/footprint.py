"""Image footprints: ground coverage polygons on an average elevation plane."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CameraPose, Intrinsics
from .polygon import ConvexPolygon, DegenerateGeometryError, convex_hull, convex_intersection_area


class HorizonClipError(ValueError):
    """A corner ray misses the elevation plane (the image sees the horizon)."""


@dataclass(frozen=True)
class Footprint:
    """Ground coverage of one image on the elevation plane.

    ``center`` is the coverage polygon centroid; ``view_direction`` is the
    unit vector from the projection center to that centroid point on the
    plane (always pointing downward).
    """

    polygon: ConvexPolygon
    center: np.ndarray            # (2,) meters on the plane
    projection_center: np.ndarray  # (3,) meters
    view_direction: np.ndarray    # (3,) unit

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        pc = np.asarray(self.projection_center, dtype=float)
        vd = np.asarray(self.view_direction, dtype=float)
        if vd[2] >= 0.0:
            raise ValueError("view direction must have a negative vertical component")
        if not self.polygon.contains(center, tol=1e-9):
            raise ValueError("footprint center must lie inside its polygon")
        for name, arr in (("center", center), ("projection_center", pc), ("view_direction", vd)):
            a = np.array(arr)
            a.setflags(write=False)
            object.__setattr__(self, name, a)


def project_footprint(pose: CameraPose, intrinsics: Intrinsics, elevation: float) -> Footprint:
    """Project the four image corners onto the plane z = elevation.

    The camera must be above the plane and every corner ray must strike it in
    front of the camera; oblique tilts whose half field of view reaches the
    horizon are rejected rather than clipped.
    """
    center3 = pose.translation
    if center3[2] <= elevation + 1e-12:
        raise DegenerateGeometryError(
            f"projection center z={center3[2]:.3f} not above elevation plane z={elevation:.3f}"
        )
    w2 = intrinsics.sensor_width_mm / 2.0
    h2 = intrinsics.sensor_height_mm / 2.0
    f = intrinsics.focal_mm
    corners_cam = np.array([
        [-w2, -h2, f],
        [w2, -h2, f],
        [w2, h2, f],
        [-w2, h2, f],
    ])
    cam_to_world = pose.rotation.T
    ground = []
    for d_cam in corners_cam:
        d = cam_to_world @ d_cam
        if d[2] >= 0.0:
            raise HorizonClipError("corner ray parallel to or pointing away from the elevation plane")
        t = (elevation - center3[2]) / d[2]
        ground.append((center3[0] + t * d[0], center3[1] + t * d[1]))
    poly = convex_hull(ground)
    center = poly.centroid
    view = np.array([center[0], center[1], elevation]) - center3
    view = view / np.linalg.norm(view)
    return Footprint(poly, center, center3, view)


def intersection_angle(a: Footprint, b: Footprint) -> float:
    """Angle between the two view directions, degrees in [0, 180]."""
    dot = float(np.dot(a.view_direction, b.view_direction))
    return math.degrees(math.acos(max(-1.0, min(1.0, dot))))


def overlap_extent(target: Footprint, neighbor: Footprint) -> tuple[float, float, float, float]:
    """Envelope widths/heights (Wo, Ho, Wt, Ht) of the overlap and the target."""
    xmin, ymin, xmax, ymax = target.polygon.bounds
    wt, ht = xmax - xmin, ymax - ymin
    poly, _ = convex_intersection_area(target.polygon, neighbor.polygon)
    if poly is None:
        return 0.0, 0.0, wt, ht
    oxmin, oymin, oxmax, oymax = poly.bounds
    return oxmax - oxmin, oymax - oymin, wt, ht


def quadrant_of(target_center, neighbor_center) -> int:
    """Quadrant index (1..4) of the neighbor center about the target center.

    Half-open wedges make the assignment exhaustive and deterministic:
    1: dx>0, dy>=0;  2: dx<=0, dy>0;  3: dx<0, dy<=0;  4: dx>=0, dy<0.
    """
    dx = float(neighbor_center[0]) - float(target_center[0])
    dy = float(neighbor_center[1]) - float(target_center[1])
    if math.hypot(dx, dy) <= 1e-9:
        raise ValueError("coincident footprint centers have no quadrant")
    if dx > 0.0 and dy >= 0.0:
        return 1
    if dx <= 0.0 and dy > 0.0:
        return 2
    if dx < 0.0 and dy <= 0.0:
        return 3
    return 4
