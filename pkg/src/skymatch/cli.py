"""Command-line pipeline: simulate -> pairs -> graph -> ba -> stats.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable/ill-formed
inputs, unknown presets or ids).  All randomness is seeded through --seed,
and outputs are bytewise deterministic unless --timings is requested.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import formats
from .footprint import project_footprint
from .geometry import PlatformPose, compose_camera_pose
from .graph import (ExpansionParams, WeightedGraph, build_tcn, graph_stats,
                    maximum_spanning_tree, mst_expansion)
from .pairs import CandidatePair, SelectionParams, exhaustive_pairs, select_pairs
from .sfm import BaOptions, Camera, Scene, bundle_adjust_gcp, incremental_reconstruct, \
    project_point, triangulate
from .simulate import FlightConfig, SyntheticScene, flight_footprints, generate_flight, \
    generate_scene, perturb_priors, rig_preset, simulate_observations
from .tracks import Track


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="skymatch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic flight log and ground scene")
    p.add_argument("--preset", required=True, choices=["single-oblique", "dual", "penta"])
    p.add_argument("--strips", type=int, default=3)
    p.add_argument("--stations", type=int, default=5)
    p.add_argument("--height", type=float, default=None)
    p.add_argument("--forward-overlap", type=float, default=None)
    p.add_argument("--side-overlap", type=float, default=None)
    p.add_argument("--no-serpentine", action="store_true")
    p.add_argument("--density", type=float, default=0.001, help="scene points per m^2")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("pairs", help="select match pairs from a flight log")
    p.add_argument("--log", required=True)
    p.add_argument("--preset", required=True)
    p.add_argument("--elevation", type=float, default=0.0)
    p.add_argument("--overlap-ratio", type=float, default=0.5)
    p.add_argument("--no-soc", action="store_true")
    p.add_argument("--exhaustive", action="store_true",
                   help="all-pairs baseline instead of distance-ordered selection")
    p.add_argument("--ti", type=int, default=8, help="consecutive non-intersection cutoff")
    p.add_argument("--rw", type=float, default=0.6, help="weight ratio for reported weights")
    p.add_argument("--out", required=True, help="pairs CSV path")
    p.add_argument("--stats", default=None, help="optional stats JSON path")
    p.add_argument("--timings", action="store_true")

    p = sub.add_parser("graph", help="build the match graph from pairs")
    p.add_argument("--log", required=True)
    p.add_argument("--preset", required=True)
    p.add_argument("--pairs", default=None, help="pairs CSV; recomputed per --mode when omitted")
    p.add_argument("--mode", required=True, choices=["full", "reduced", "mst", "mst-expansion"])
    p.add_argument("--elevation", type=float, default=0.0)
    p.add_argument("--overlap-ratio", type=float, default=0.5)
    p.add_argument("--ti", type=int, default=8)
    p.add_argument("--rw", type=float, default=0.6)
    p.add_argument("--re", type=float, default=3.0)
    p.add_argument("--alpha", type=float, default=45.0)
    p.add_argument("--te", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--timings", action="store_true")

    p = sub.add_parser("ba", help="verify a match graph with synthetic bundle adjustment")
    p.add_argument("--log", required=True)
    p.add_argument("--preset", required=True)
    p.add_argument("--graph-pairs", required=True, help="graph edges CSV from the graph stage")
    p.add_argument("--scene", required=True, help="scene points CSV from simulate")
    p.add_argument("--elevation", type=float, default=0.0)
    p.add_argument("--noise", type=float, default=0.0, help="pixel noise sigma")
    p.add_argument("--perturb-pos", type=float, default=0.0, help="prior position sigma, m")
    p.add_argument("--perturb-ang", type=float, default=0.0, help="prior attitude sigma, deg")
    p.add_argument("--gcp", default=None, help="ground control CSV (control/check roles)")
    p.add_argument("--local-batch", type=int, default=5)
    p.add_argument("--max-iterations", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="report JSON path")

    p = sub.add_parser("stats", help="aggregate stats JSON files into one table")
    p.add_argument("files", nargs="+")
    p.add_argument("--out", default=None, help="optional CSV path")
    return parser


def _load_block(log_path, preset_name, elevation):
    """Flight log -> (records, rig, camera poses, intrinsics, footprints)."""
    records = formats.parse_flight_log(log_path)
    if not records:
        raise formats.ParseError(f"{log_path}: no data rows")
    rig = rig_preset(preset_name)
    poses, intr, fps = [], [], []
    for rec in records:
        cam = rig.camera(rec.camera_id)
        platform = PlatformPose.from_euler(rec.yaw_deg, rec.pitch_deg, rec.roll_deg,
                                           (rec.x, rec.y, rec.z))
        pose = compose_camera_pose(platform, cam.mount, rec.camera_id, rec.image_id)
        poses.append(pose)
        intr.append(cam.intrinsics)
        fps.append(project_footprint(pose, cam.intrinsics, elevation))
    return records, rig, poses, intr, fps


def _pair_records(pairs: list[CandidatePair], image_ids: list[str], weight_ratio: float,
                  weights: list[float] | None = None) -> list[formats.PairRecord]:
    if weights is None:
        area_max = max((p.overlap_area for p in pairs), default=1.0)
        from .graph import WeightParams, edge_weight

        params = WeightParams(weight_ratio, area_max)
        weights = [edge_weight(p.overlap_area, p.angle_deg, params) for p in pairs]
    return [
        formats.PairRecord(image_ids[p.i], image_ids[p.j], p.overlap_area, p.angle_deg, w)
        for p, w in zip(pairs, weights)
    ]


def _pairs_from_records(rows: list[formats.PairRecord], image_ids: list[str]) -> list[CandidatePair]:
    index = {name: k for k, name in enumerate(image_ids)}
    out = []
    for r in rows:
        try:
            i, j = index[r.image_i], index[r.image_j]
        except KeyError as exc:
            raise formats.ParseError(f"pairs file references unknown image_id {exc}") from None
        if i >= j:
            raise formats.ParseError(f"pair {r.image_i},{r.image_j} is not in canonical order")
        out.append(CandidatePair(i, j, r.area_m2, r.angle_deg))
    return out


def _cmd_simulate(args) -> int:
    rig = rig_preset(args.preset)
    config = FlightConfig(
        height=args.height if args.height is not None else rig.default_height,
        forward_overlap=(args.forward_overlap if args.forward_overlap is not None
                         else rig.default_forward_overlap),
        side_overlap=(args.side_overlap if args.side_overlap is not None
                      else rig.default_side_overlap),
        strips=args.strips,
        stations=args.stations,
        serpentine=not args.no_serpentine,
        seed=args.seed,
    )
    images = generate_flight(config, rig)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = [
        formats.FlightLogRecord(
            img.image_id, img.camera_id,
            float(img.platform.translation[0]), float(img.platform.translation[1]),
            float(img.platform.translation[2]),
            img.yaw_deg, img.pitch_deg, img.roll_deg)
        for img in images
    ]
    formats.write_flight_log(records, out / "flight_log.csv")
    fps = flight_footprints(images, rig)
    bounds = np.array([fp.polygon.bounds for fp in fps])
    extent = (float(bounds[:, 0].min()), float(bounds[:, 1].min()),
              float(bounds[:, 2].max()), float(bounds[:, 3].max()))
    scene = generate_scene(extent, args.density, args.seed)
    formats.write_scene_points(scene.points, out / "scene.csv")
    print(f"wrote {len(records)} images and {len(scene.points)} scene points to {out}")
    return 0


def _cmd_pairs(args) -> int:
    t0 = time.perf_counter()
    records, rig, poses, intr, fps = _load_block(args.log, args.preset, args.elevation)
    image_ids = [r.image_id for r in records]
    params = SelectionParams(non_intersection_threshold=args.ti,
                             overlap_ratio=args.overlap_ratio,
                             soc_enabled=not args.no_soc)
    stats = formats.PipelineStats()
    if args.exhaustive:
        pairs = exhaustive_pairs(fps)
        stats.pairs_full = len(pairs)
        stats.tests_per_image_mean = float(len(fps) - 1)
    else:
        result = select_pairs(fps, params)
        pairs = result.pairs
        stats.tests_per_image_mean = result.mean_tests
        if params.soc_enabled:
            stats.pairs_reduced = len(pairs)
        else:
            stats.pairs_full = len(pairs)
    formats.write_pairs(_pair_records(pairs, image_ids, args.rw), args.out)
    if args.stats:
        if args.timings:
            stats.wall_ms["pairs"] = 1000.0 * (time.perf_counter() - t0)
        formats.write_stats_json(stats, args.stats)
    print(f"selected {len(pairs)} pairs from {len(fps)} images")
    return 0


def _cmd_graph(args) -> int:
    t0 = time.perf_counter()
    records, rig, poses, intr, fps = _load_block(args.log, args.preset, args.elevation)
    image_ids = [r.image_id for r in records]
    centers = np.array([fp.center for fp in fps])
    if args.pairs is not None:
        base_pairs = _pairs_from_records(formats.read_pairs(args.pairs), image_ids)
    elif args.mode == "full":
        base_pairs = exhaustive_pairs(fps)
    else:
        params = SelectionParams(non_intersection_threshold=args.ti,
                                 overlap_ratio=args.overlap_ratio, soc_enabled=True)
        base_pairs = select_pairs(fps, params).pairs
    tcn = build_tcn(base_pairs, centers, args.rw)
    if args.mode in ("full", "reduced"):
        graph = tcn
    else:
        mst = maximum_spanning_tree(tcn)
        if args.mode == "mst":
            graph = mst
        else:
            graph = mst_expansion(tcn, mst, ExpansionParams(args.re, args.alpha, args.te))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    edge_pairs, weights = [], []
    for i, j, attrs in graph.edges():
        edge_pairs.append(CandidatePair(i, j, attrs.area, attrs.angle_deg))
        weights.append(attrs.weight)
    formats.write_pairs(_pair_records(edge_pairs, image_ids, args.rw, weights),
                        out / "graph_pairs.csv")
    formats.export_dot(graph, out / "graph.dot", labels=image_ids)
    formats.export_adjacency_pgm(graph, out / "graph.pgm")

    gstats = graph_stats(graph)
    stats = formats.PipelineStats(
        pairs_full=len(exhaustive_pairs(fps)),
        pairs_reduced=len(base_pairs),
        pairs_graph=graph.num_edges,
        components=gstats.components,
    )
    stats.reduction_ratio = stats.pairs_full / stats.pairs_graph if stats.pairs_graph else 0.0
    if args.timings:
        stats.wall_ms["graph"] = 1000.0 * (time.perf_counter() - t0)
    formats.write_stats_json(stats, out / "stats.json")
    print(f"mode {args.mode}: {graph.num_edges} edges over {graph.n} images "
          f"({gstats.components} component(s))")
    return 0


def _cmd_ba(args) -> int:
    records, rig, poses, intr, fps = _load_block(args.log, args.preset, args.elevation)
    image_ids = [r.image_id for r in records]
    centers = np.array([fp.center for fp in fps])
    rows = formats.read_pairs(args.graph_pairs)
    index = {name: k for k, name in enumerate(image_ids)}
    graph = WeightedGraph(centers)
    for r in rows:
        try:
            i, j = index[r.image_i], index[r.image_j]
        except KeyError as exc:
            raise formats.ParseError(f"graph pairs reference unknown image_id {exc}") from None
        graph.add_edge(i, j, r.weight, r.area_m2, r.angle_deg)

    scene_pts = formats.read_scene_points(args.scene)
    scene = SyntheticScene(scene_pts, args.seed, args.noise)
    matches = simulate_observations(list(zip(poses, intr)), scene, args.noise, args.seed,
                                    pairs=[(i, j) for i, j, _ in graph.edges()],
                                    elevation=args.elevation)
    priors = perturb_priors(poses, args.perturb_pos, args.perturb_ang, args.seed + 1)
    opts = BaOptions(max_iterations=args.max_iterations, local_batch=args.local_batch)
    result = incremental_reconstruct(graph, matches, priors, intr, opts)

    report = {
        "total_images": graph.n,
        "registered_images": result.registered_count,
        "unregistered_ids": [image_ids[k] for k in result.unregistered],
        "stage_rmse_px": [[label, rmse] for label, rmse in result.stage_rmse],
        "final_rmse_px": result.report.final_rmse if result.report else 0.0,
        "iterations": result.report.iterations if result.report else 0,
        "converged": bool(result.report.converged) if result.report else False,
        "noise_px": args.noise,
        "seed": args.seed,
        "gcp": None,
    }
    if args.gcp:
        report["gcp"] = _gcp_stage(args, records, poses, intr, result)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")
    print(f"registered {result.registered_count}/{graph.n} images, "
          f"final RMSE {report['final_rmse_px']:.4g} px")
    return 0


def _gcp_stage(args, records, poses, intr, result) -> dict:
    """Absolute orientation against surveyed markers, then check-point residuals.

    Control and check markers are projected into the registered cameras (the
    measured marker pixels), appended to the reconstruction as extra tracks,
    and the control coordinates are held fixed during a final adjustment.
    """
    gcps = formats.read_gcp_file(args.gcp)
    rng = np.random.default_rng(args.seed + 2)
    scene = result.scene
    cams = list(scene.cameras)
    true_cams = [Camera(poses[img], intr[img]) for img in result.image_order]
    points = list(scene.points)
    ci = list(scene.camera_indices)
    pi = list(scene.point_indices)
    px = list(scene.pixels)
    marker_rows = {}
    for g in gcps:
        target = np.array([g.x, g.y, g.z])
        obs = []
        for slot, cam in enumerate(true_cams):
            try:
                pixel = project_point(cam, target)
            except Exception:
                continue
            w, h = cam.intrinsics.image_width_px, cam.intrinsics.image_height_px
            if not (0.0 <= pixel[0] <= w and 0.0 <= pixel[1] <= h):
                continue
            noisy = pixel + rng.normal(0.0, args.noise, 2) if args.noise > 0 else pixel
            obs.append((slot, (float(noisy[0]), float(noisy[1]))))
        if len(obs) < 2:
            continue
        estimate = triangulate(Track(tuple(obs)), cams)
        marker_rows[g.point_id] = (g, len(points))
        points.append(estimate)
        for slot, pixel in obs:
            ci.append(slot)
            pi.append(len(points) - 1)
            px.append(pixel)
    control = [(g, row) for g, row in marker_rows.values() if g.role == "control"]
    checks = [(g, row) for g, row in marker_rows.values() if g.role == "check"]
    merged = Scene(cams, np.array(points), np.array(ci, dtype=int), np.array(pi, dtype=int),
                   np.array(px, dtype=float))
    adjusted, rep = bundle_adjust_gcp(
        merged, [row for _, row in control], np.array([[g.x, g.y, g.z] for g, _ in control]),
        BaOptions(max_iterations=args.max_iterations, local_batch=args.local_batch))
    residuals = np.array([adjusted.points[row] - np.array([g.x, g.y, g.z]) for g, row in checks])
    out = {
        "control_count": len(control),
        "check_count": len(checks),
        "rmse_px": rep.final_rmse,
        "converged": bool(rep.converged),
    }
    if len(checks):
        out["check_mean_m"] = {axis: float(residuals[:, k].mean()) for k, axis in enumerate("xyz")}
        out["check_rmse_m"] = {axis: float(np.sqrt(np.mean(residuals[:, k] ** 2)))
                               for k, axis in enumerate("xyz")}
    return out


def _cmd_stats(args) -> int:
    rows = [(Path(p).name, formats.read_stats_json(p)) for p in args.files]
    cols = ["pairs_full", "pairs_reduced", "pairs_graph", "reduction_ratio",
            "tests_per_image_mean", "components", "registered_images", "rmse_px"]
    widths = {c: max(len(c), 12) for c in cols}
    name_w = max(len("file"), max((len(n) for n, _ in rows), default=4))
    header = "file".ljust(name_w) + "  " + "  ".join(c.rjust(widths[c]) for c in cols)
    print(header)
    lines = [",".join(["file"] + cols)]
    for name, st in rows:
        vals = [getattr(st, c) for c in cols]
        print(name.ljust(name_w) + "  "
              + "  ".join(f"{v:.6g}".rjust(widths[c]) if isinstance(v, float) else str(v).rjust(widths[c])
                          for c, v in zip(cols, vals)))
        lines.append(",".join([name] + [f"{v:.6g}" if isinstance(v, float) else str(v) for v in vals]))
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "pairs": _cmd_pairs,
    "graph": _cmd_graph,
    "ba": _cmd_ba,
    "stats": _cmd_stats,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (formats.ParseError, OSError, KeyError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


def run_cli(argv=None) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
