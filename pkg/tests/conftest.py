import numpy as np
import pytest

from skymatch.geometry import Intrinsics, mount_from_angles
from skymatch.simulate import RigCamera, RigPreset


@pytest.fixture
def nadir_rig():
    """Single straight-down camera; the simplest block geometry for oracles."""
    return RigPreset(
        "nadir-test",
        (RigCamera("cam0", mount_from_angles(0.0, 0.0), Intrinsics(35.0, 35.8, 23.9, 6000, 4000)),),
        default_height=100.0,
        default_forward_overlap=0.6,
        default_side_overlap=0.4,
    )


def random_convex_polygon(rng: np.random.Generator, n_points: int = 12, scale: float = 10.0):
    """Hull of random points in a disk; guaranteed valid and CCW."""
    from skymatch.polygon import convex_hull

    radii = np.sqrt(rng.random(n_points)) * scale
    angles = rng.random(n_points) * 2.0 * np.pi
    pts = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    pts += rng.normal(0.0, 0.5 * scale, 2)
    return convex_hull(pts)


def build_block(rig, strips=3, stations=6, density=0.02, sigma=0.0, seed=1,
                forward=0.8, side=0.6, height=100.0):
    """Synthetic block: cameras, ground truth, tracks, and a ready Scene."""
    import numpy as np

    from skymatch.sfm import Camera, scene_from_tracks, triangulate
    from skymatch.simulate import (FlightConfig, flight_camera_poses, flight_footprints,
                                   generate_flight, generate_scene, simulate_observations)
    from skymatch.tracks import build_tracks

    cfg = FlightConfig(height=height, forward_overlap=forward, side_overlap=side,
                       strips=strips, stations=stations, serpentine=False)
    images = generate_flight(cfg, rig)
    poses = flight_camera_poses(images, rig)
    intr = [rig.camera(img.camera_id).intrinsics for img in images]
    fps = flight_footprints(images, rig)
    bounds = np.array([fp.polygon.bounds for fp in fps])
    extent = (bounds[:, 0].min(), bounds[:, 1].min(), bounds[:, 2].max(), bounds[:, 3].max())
    ground = generate_scene(extent, density, seed)
    matches = simulate_observations(list(zip(poses, intr)), ground, sigma, seed + 1)
    tracks = build_tracks(matches)
    cameras = [Camera(p, i) for p, i in zip(poses, intr)]
    points = np.array([triangulate(t, cameras) for t in tracks])
    scene = scene_from_tracks(cameras, tracks, points)
    return {
        "images": images, "poses": poses, "intrinsics": intr, "footprints": fps,
        "ground": ground, "matches": matches, "tracks": tracks, "scene": scene,
    }
