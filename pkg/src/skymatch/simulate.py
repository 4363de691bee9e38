"""Deterministic synthetic flights, camera rigs, and ground scenes.

Everything here is a pure function of its configuration and seed, so the
whole pipeline can be exercised and verified without real imagery.  The
bundled rig presets model three production oblique systems: a single tilted
camera, a forward/sideways dual rig, and a five-head (nadir + four oblique)
rig.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .footprint import Footprint, intersection_angle, project_footprint
from .geometry import CameraMount, CameraPose, Intrinsics, PlatformPose, compose_camera_pose, \
    mount_from_angles, rotation_from_rotvec


@dataclass(frozen=True)
class RigCamera:
    camera_id: str
    mount: CameraMount
    intrinsics: Intrinsics


@dataclass(frozen=True)
class RigPreset:
    name: str
    cameras: tuple[RigCamera, ...]
    default_height: float
    default_forward_overlap: float
    default_side_overlap: float

    def __post_init__(self):
        if not self.cameras:
            raise ValueError("a rig needs at least one camera")

    def camera(self, camera_id: str) -> RigCamera:
        for cam in self.cameras:
            if cam.camera_id == camera_id:
                return cam
        raise KeyError(f"rig {self.name!r} has no camera {camera_id!r}")

    def nadir_most(self) -> RigCamera:
        """The camera whose optical axis tilts least from straight down."""
        def tilt(cam: RigCamera) -> float:
            view = cam.mount.rotation.T @ np.array([0.0, 0.0, 1.0])
            return math.degrees(math.acos(max(-1.0, min(1.0, -view[2]))))
        return min(self.cameras, key=tilt)


_FULL_FRAME = dict(sensor_width_mm=35.8, sensor_height_mm=23.9,
                   image_width_px=6000, image_height_px=4000)
_APSC = dict(sensor_width_mm=23.4, sensor_height_mm=15.6,
             image_width_px=6000, image_height_px=4000)

PRESET_NAMES = ("single-oblique", "dual", "penta")


def rig_preset(name: str) -> RigPreset:
    if name == "single-oblique":
        return RigPreset(name, (
            RigCamera("cam0_front", mount_from_angles(25.0, -15.0), Intrinsics(35.0, **_FULL_FRAME)),
        ), default_height=165.0, default_forward_overlap=0.85, default_side_overlap=0.45)
    if name == "dual":
        return RigPreset(name, (
            RigCamera("cam0_front", mount_from_angles(25.0, -15.0), Intrinsics(35.0, **_FULL_FRAME)),
            RigCamera("cam1_back", mount_from_angles(0.0, -25.0), Intrinsics(35.0, **_FULL_FRAME)),
        ), default_height=120.0, default_forward_overlap=0.85, default_side_overlap=0.50)
    if name == "penta":
        oblique = Intrinsics(35.0, **_APSC)
        return RigPreset(name, (
            RigCamera("cam0_nadir", mount_from_angles(0.0, 0.0), Intrinsics(16.0, **_APSC)),
            RigCamera("cam1_east", mount_from_angles(-45.0, 0.0), oblique),
            RigCamera("cam2_west", mount_from_angles(45.0, 0.0), oblique),
            RigCamera("cam3_north", mount_from_angles(0.0, 45.0), oblique),
            RigCamera("cam4_south", mount_from_angles(0.0, -45.0), oblique),
        ), default_height=175.0, default_forward_overlap=0.75, default_side_overlap=0.70)
    raise KeyError(f"unknown rig preset {name!r}; choose from {PRESET_NAMES}")


@dataclass(frozen=True)
class FlightConfig:
    height: float                 # meters above the elevation plane
    forward_overlap: float
    side_overlap: float
    strips: int
    stations: int
    serpentine: bool = True
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.forward_overlap <= 0.95 and 0.0 <= self.side_overlap <= 0.95):
            raise ValueError("overlaps must lie in [0, 0.95]")
        if self.strips < 1 or self.stations < 1:
            raise ValueError("strips and stations must be >= 1")
        if self.height <= 0.0:
            raise ValueError("flight height must be positive")


@dataclass(frozen=True)
class FlightImage:
    image_id: str
    camera_id: str
    station_id: str
    platform: PlatformPose
    yaw_deg: float = 0.0
    pitch_deg: float = 0.0
    roll_deg: float = 0.0


def flight_spacing(config: FlightConfig, rig: RigPreset) -> tuple[float, float]:
    """Station and strip spacing from the nadir-equivalent footprint.

    The nadir-most camera's ideal vertical footprint at the flight height
    sets the ground extents; overlap fractions then fix the grid pitch.
    """
    cam = rig.nadir_most()
    length = cam.intrinsics.sensor_width_mm * config.height / cam.intrinsics.focal_mm
    width = cam.intrinsics.sensor_height_mm * config.height / cam.intrinsics.focal_mm
    return length * (1.0 - config.forward_overlap), width * (1.0 - config.side_overlap)


def generate_flight(config: FlightConfig, rig: RigPreset) -> list[FlightImage]:
    """Regular serpentine grid of exposure stations, one image per rig camera.

    Strips run along +x; odd strips fly back with yaw 180 when serpentine.
    """
    along, across = flight_spacing(config, rig)
    images = []
    for strip in range(config.strips):
        backward = config.serpentine and strip % 2 == 1
        yaw = 180.0 if backward else 0.0
        for station in range(config.stations):
            col = config.stations - 1 - station if backward else station
            pos = np.array([col * along, strip * across, config.height])
            platform = PlatformPose.from_euler(yaw, 0.0, 0.0, pos)
            station_id = f"s{strip:02d}t{station:02d}"
            for cam in rig.cameras:
                images.append(FlightImage(
                    image_id=f"{station_id}_{cam.camera_id}",
                    camera_id=cam.camera_id,
                    station_id=station_id,
                    platform=platform,
                    yaw_deg=yaw,
                ))
    return images


def flight_camera_poses(images: list[FlightImage], rig: RigPreset) -> list[CameraPose]:
    return [
        compose_camera_pose(img.platform, rig.camera(img.camera_id).mount,
                            camera_id=img.camera_id, station_id=img.station_id)
        for img in images
    ]


def flight_footprints(images: list[FlightImage], rig: RigPreset, elevation: float = 0.0) -> list[Footprint]:
    return [
        project_footprint(pose, rig.camera(img.camera_id).intrinsics, elevation)
        for img, pose in zip(images, flight_camera_poses(images, rig))
    ]


@dataclass(frozen=True)
class SyntheticScene:
    points: np.ndarray   # (n, 3)
    seed: int
    noise_sigma_px: float = 0.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)


def generate_scene(extent: tuple[float, float, float, float], density: float, seed: int,
                   height_jitter: float = 0.0, elevation: float = 0.0) -> SyntheticScene:
    """Stratified jittered grid of ground points: exact counts, seeded jitter."""
    if density <= 0.0:
        raise ValueError("density must be positive")
    xmin, ymin, xmax, ymax = extent
    w, h = xmax - xmin, ymax - ymin
    if w <= 0.0 or h <= 0.0:
        raise ValueError("extent must have positive width and height")
    nx = max(1, round(w * math.sqrt(density)))
    ny = max(1, round(h * math.sqrt(density)))
    rng = np.random.default_rng(seed)
    jitter = rng.random((ny, nx, 2))
    cell_w, cell_h = w / nx, h / ny
    gx = xmin + (np.tile(np.arange(nx), ny) + jitter[:, :, 0].ravel()) * cell_w
    gy = ymin + (np.repeat(np.arange(ny), nx) + jitter[:, :, 1].ravel()) * cell_h
    gz = np.full(nx * ny, float(elevation))
    if height_jitter > 0.0:
        gz = gz + rng.normal(0.0, height_jitter, nx * ny)
    return SyntheticScene(np.column_stack([gx, gy, gz]), seed)


def simulate_observations(
    cameras: list[tuple[CameraPose, Intrinsics]],
    scene: SyntheticScene,
    sigma_px: float,
    seed: int,
    pairs: list[tuple[int, int]] | None = None,
    max_angle_deg: float = 90.0,
    elevation: float = 0.0,
) -> dict[tuple[int, int], list[tuple[tuple[float, float], tuple[float, float]]]]:
    """Project the scene into every camera and emit per-pair pixel matches.

    Noise is drawn once per (point, camera) observation, so the same feature
    carries identical pixels into every pair that sees it.  Pairs whose
    footprint view directions differ by more than ``max_angle_deg`` produce
    no matches (perspective distortion defeats descriptor matching); pairs
    without co-visible points are simply absent from the result.
    """
    if sigma_px < 0.0:
        raise ValueError("sigma_px must be nonnegative")
    n = len(cameras)
    pts = scene.points
    npts = len(pts)
    pix = np.zeros((n, npts, 2))
    visible = np.zeros((n, npts), dtype=bool)
    for c, (pose, intr) in enumerate(cameras):
        xc = (pts - pose.translation) @ pose.rotation.T
        depth = xc[:, 2]
        ok = depth > 0.0
        cx, cy = intr.principal_point_px
        with np.errstate(divide="ignore", invalid="ignore"):
            u = cx + intr.focal_px_x * xc[:, 0] / depth
            v = cy + intr.focal_px_y * xc[:, 1] / depth
        ok &= (u >= 0.0) & (u <= intr.image_width_px) & (v >= 0.0) & (v <= intr.image_height_px)
        visible[c] = ok
        pix[c, :, 0] = u
        pix[c, :, 1] = v
    rng = np.random.default_rng(seed)
    if sigma_px > 0.0:
        # Per-observation noise in a fixed (camera-major, point-major) order.
        noise = rng.normal(0.0, sigma_px, (n, npts, 2))
        pix = pix + noise
    footprints = [project_footprint(pose, intr, elevation) for pose, intr in cameras]
    if pairs is None:
        pairs = list(itertools.combinations(range(n), 2))
    matches: dict[tuple[int, int], list] = {}
    for i, j in pairs:
        i, j = (i, j) if i < j else (j, i)
        if intersection_angle(footprints[i], footprints[j]) > max_angle_deg + 1e-9:
            continue
        both = np.nonzero(visible[i] & visible[j])[0]
        if len(both) == 0:
            continue
        matches[(i, j)] = [
            ((float(pix[i, p, 0]), float(pix[i, p, 1])),
             (float(pix[j, p, 0]), float(pix[j, p, 1])))
            for p in both
        ]
    return matches


def perturb_priors(poses: list[CameraPose], sigma_pos_m: float, sigma_ang_deg: float,
                   seed: int) -> list[CameraPose]:
    """Gaussian pose noise: translation ~ N(0, sigma_pos^2 I3) and rotation by
    a rotation vector ~ N(0, sigma_ang^2 I3) applied on the left, so the mean
    displacement and mean rotation angle are sigma * sqrt(8/pi) each.
    """
    if sigma_pos_m < 0.0 or sigma_ang_deg < 0.0:
        raise ValueError("perturbation sigmas must be nonnegative")
    rng = np.random.default_rng(seed)
    out = []
    for pose in poses:
        dt = rng.normal(0.0, sigma_pos_m, 3) if sigma_pos_m > 0.0 else np.zeros(3)
        rotation = pose.rotation
        if sigma_ang_deg > 0.0:
            omega = np.radians(rng.normal(0.0, sigma_ang_deg, 3))
            rotation = rotation_from_rotvec(omega) @ rotation
        out.append(CameraPose(rotation, pose.translation + dt, pose.camera_id, pose.station_id))
    return out
