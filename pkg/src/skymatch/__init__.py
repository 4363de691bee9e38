"""Match-pair planning and verification for oblique UAV photogrammetry blocks.

The pipeline: camera poses and ground footprints from flight-control priors
(:mod:`skymatch.geometry`, :mod:`skymatch.footprint`), spatially constrained
match pair selection (:mod:`skymatch.pairs`), weighted connection-network
simplification by maximum spanning tree plus expansion
(:mod:`skymatch.graph`), and a synthetic-scene bundle-adjustment backend to
verify the resulting match graphs (:mod:`skymatch.simulate`,
:mod:`skymatch.sfm`).  File formats and the subcommand CLI live in
:mod:`skymatch.formats` and :mod:`skymatch.cli`.
"""

from .footprint import Footprint, HorizonClipError, intersection_angle, overlap_extent, \
    project_footprint, quadrant_of
from .geometry import CameraMount, CameraPose, Intrinsics, PlatformPose, compose_camera_pose, \
    geodetic_to_local, mount_from_angles, rotation_from_euler
from .graph import ExpansionParams, WeightedGraph, WeightParams, build_tcn, edge_weight, \
    graph_stats, in_expansion_region, local_axes, maximum_spanning_tree, mst_expansion
from .pairs import CandidatePair, IndicatorState, NeighborIndex, SelectionParams, \
    exhaustive_pairs, select_pairs, should_terminate, soc_check, update_indicators
from .polygon import ConvexPolygon, DegenerateGeometryError, convex_hull, convex_intersection_area
from .sfm import BaOptions, BaReport, BehindCameraError, Camera, Scene, bundle_adjust, \
    bundle_adjust_gcp, incremental_reconstruct, project_point, reprojection_cost, triangulate
from .simulate import FlightConfig, RigPreset, SyntheticScene, generate_flight, generate_scene, \
    perturb_priors, rig_preset, simulate_observations
from .tracks import Track, build_tracks

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
