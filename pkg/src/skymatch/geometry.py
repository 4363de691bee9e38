"""Camera pose algebra and coordinate conversions for aerial image blocks.

Frame conventions, fixed package-wide:

* World frame: local ENU, x east, y north, z up, meters.
* Euler angles in degrees: yaw about +z, pitch about +y, roll about +x,
  composed ``Rz(yaw) @ Ry(pitch) @ Rx(roll)`` (right-handed).  That product
  is the attitude matrix mapping body coordinates into the world frame.
* Pose rotations stored on the dataclasses below are world->frame (or
  parent->child) direction-cosine matrices.  Pose translations are the
  position of the frame origin expressed in the parent frame: platform and
  camera centers in world meters, the mount lever arm in the platform body
  frame.  Flight-log attitudes therefore enter a pose transposed; see
  ``PlatformPose.from_euler``.
* Camera frame: x right, y down (image axes), z forward along the optical
  axis.  A camera with an identity mount looks straight down with image x
  aligned to world x.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

ROTATION_TOL = 1e-9

# WGS-84 ellipsoid
_WGS84_A = 6378137.0
_WGS84_F = 1.0 / 298.257223563
_WGS84_E2 = _WGS84_F * (2.0 - _WGS84_F)

# Camera base orientation: identity mount = nadir view.  Rows are the camera
# axes in body coordinates: x_cam = x_body, y_cam = -y_body, z_cam = -z_body.
NADIR_BASE = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
NADIR_BASE.setflags(write=False)


def _rot_x(deg: float) -> np.ndarray:
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_y(deg: float) -> np.ndarray:
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_z(deg: float) -> np.ndarray:
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_from_euler(
    yaw_deg: float, pitch_deg: float, roll_deg: float, convention: str = "zyx"
) -> np.ndarray:
    """Attitude matrix Rz(yaw) @ Ry(pitch) @ Rx(roll), body->world."""
    if convention != "zyx":
        raise ValueError(f"unsupported euler convention {convention!r}")
    angles = (yaw_deg, pitch_deg, roll_deg)
    if not all(math.isfinite(a) for a in angles):
        raise ValueError(f"non-finite euler angles {angles}")
    return _rot_z(yaw_deg) @ _rot_y(pitch_deg) @ _rot_x(roll_deg)


def rotation_from_rotvec(omega: np.ndarray) -> np.ndarray:
    """Rodrigues map: rotation by |omega| radians about omega/|omega|."""
    omega = np.asarray(omega, dtype=float)
    theta = float(np.linalg.norm(omega))
    if theta == 0.0:
        return np.eye(3)
    k = omega / theta
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(theta) * kx + (1.0 - math.cos(theta)) * (kx @ kx)


def validate_rotation(m: np.ndarray, tol: float = ROTATION_TOL) -> np.ndarray:
    """Check orthonormality (R^T R = I) and det = +1 within tol."""
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        raise ValueError("rotation must be a finite 3x3 matrix")
    if np.max(np.abs(m.T @ m - np.eye(3))) > tol:
        raise ValueError("rotation matrix is not orthonormal")
    if abs(np.linalg.det(m) - 1.0) > tol:
        raise ValueError("rotation matrix must have determinant +1")
    return m


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_vec3(v: np.ndarray, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be a finite 3-vector")
    return v


@dataclass(frozen=True)
class PlatformPose:
    """Pose of the carrier platform at one exposure station.

    ``rotation`` maps world to body coordinates; ``translation`` is the
    platform position in world meters.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _freeze(validate_rotation(self.rotation)))
        object.__setattr__(self, "translation", _freeze(_check_vec3(self.translation, "translation")))

    @classmethod
    def from_euler(cls, yaw_deg: float, pitch_deg: float, roll_deg: float, translation) -> "PlatformPose":
        """Build from navigation attitude angles (attitude enters transposed)."""
        return cls(rotation_from_euler(yaw_deg, pitch_deg, roll_deg).T, translation)


@dataclass(frozen=True)
class CameraMount:
    """Rigid offset of one camera relative to the platform body.

    ``rotation`` maps body to camera coordinates; ``translation`` is the
    lever arm in body meters (zero for the rigs modelled here).
    """

    rotation: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", _freeze(validate_rotation(self.rotation)))
        object.__setattr__(self, "translation", _freeze(_check_vec3(self.translation, "lever arm")))


def mount_from_angles(pitch_deg: float, roll_deg: float, yaw_deg: float = 0.0, lever_arm=None) -> CameraMount:
    """Mount whose camera is the nadir base rotated by gimbal angles in the body frame.

    Positive pitch tips the view toward -x, positive roll toward +y (body axes).
    """
    gimbal = rotation_from_euler(yaw_deg, pitch_deg, roll_deg)
    body_to_cam = (gimbal @ NADIR_BASE.T).T
    arm = np.zeros(3) if lever_arm is None else lever_arm
    return CameraMount(body_to_cam, arm)


@dataclass(frozen=True)
class CameraPose:
    """World pose of one physical camera at one station.

    ``rotation`` maps world to camera coordinates; ``translation`` is the
    projection center in world meters.
    """

    rotation: np.ndarray
    translation: np.ndarray
    camera_id: str = ""
    station_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "rotation", _freeze(validate_rotation(self.rotation)))
        object.__setattr__(self, "translation", _freeze(_check_vec3(self.translation, "translation")))

    def view_direction(self) -> np.ndarray:
        """Unit optical-axis direction in world coordinates."""
        return self.rotation.T @ np.array([0.0, 0.0, 1.0])


def compose_camera_pose(platform: PlatformPose, mount: CameraMount,
                        camera_id: str = "", station_id: str = "") -> CameraPose:
    """Camera world pose from a platform pose and a rigid mount.

    Rotation chains parent->child maps; the lever arm is carried from body to
    world through the transposed platform rotation.
    """
    rotation = mount.rotation @ platform.rotation
    translation = platform.rotation.T @ mount.translation + platform.translation
    return CameraPose(rotation, translation, camera_id, station_id)


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole camera interior: focal length and sensor/image dimensions."""

    focal_mm: float
    sensor_width_mm: float
    sensor_height_mm: float
    image_width_px: int
    image_height_px: int

    def __post_init__(self):
        vals = (self.focal_mm, self.sensor_width_mm, self.sensor_height_mm,
                self.image_width_px, self.image_height_px)
        if not all(math.isfinite(v) and v > 0 for v in vals):
            raise ValueError("intrinsics must all be strictly positive")
        px, py = self.pixel_pitch_x_mm, self.pixel_pitch_y_mm
        if abs(px - py) > 0.05 * px:
            warnings.warn(
                f"pixel pitch differs between axes by more than 5% ({px:.6g} vs {py:.6g} mm)",
                stacklevel=2,
            )

    @property
    def pixel_pitch_x_mm(self) -> float:
        return self.sensor_width_mm / self.image_width_px

    @property
    def pixel_pitch_y_mm(self) -> float:
        return self.sensor_height_mm / self.image_height_px

    @property
    def focal_px_x(self) -> float:
        return self.focal_mm / self.pixel_pitch_x_mm

    @property
    def focal_px_y(self) -> float:
        return self.focal_mm / self.pixel_pitch_y_mm

    @property
    def principal_point_px(self) -> tuple[float, float]:
        return (self.image_width_px / 2.0, self.image_height_px / 2.0)


def geodetic_to_local(lat_deg: float, lon_deg: float, h_m: float,
                      origin: tuple[float, float, float]) -> np.ndarray:
    """ENU coordinates of a WGS-84 geodetic point about a geodetic origin.

    A local tangent plane; adequate for blocks up to a few kilometers.
    """
    for lat in (lat_deg, origin[0]):
        if not math.isfinite(lat) or abs(lat) > 90.0:
            raise ValueError(f"latitude {lat} outside [-90, 90]")
    p = _ecef(lat_deg, lon_deg, h_m)
    p0 = _ecef(*origin)
    lam = math.radians(origin[1])
    phi = math.radians(origin[0])
    sl, cl = math.sin(lam), math.cos(lam)
    sp, cp = math.sin(phi), math.cos(phi)
    enu = np.array([
        [-sl, cl, 0.0],
        [-sp * cl, -sp * sl, cp],
        [cp * cl, cp * sl, sp],
    ])
    return enu @ (p - p0)


def _ecef(lat_deg: float, lon_deg: float, h_m: float) -> np.ndarray:
    phi, lam = math.radians(lat_deg), math.radians(lon_deg)
    sp, cp = math.sin(phi), math.cos(phi)
    n = _WGS84_A / math.sqrt(1.0 - _WGS84_E2 * sp * sp)
    return np.array([
        (n + h_m) * cp * math.cos(lam),
        (n + h_m) * cp * math.sin(lam),
        (n * (1.0 - _WGS84_E2) + h_m) * sp,
    ])
