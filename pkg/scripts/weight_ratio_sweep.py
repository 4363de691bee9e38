#!/usr/bin/env python3
"""Edge-weight ratio study: how the area/angle blend shapes the match graph.

For each weight ratio the full connection network is rebuilt, simplified by
the spanning tree and expanded; connectivity is then measured on the edges
that would actually produce feature matches (co-visible ground points within
the viewing-angle cutoff).  Optionally each graph is pushed through the
incremental reconstruction to report an adjusted RMSE.
"""

import argparse
import sys

import numpy as np

from skymatch.graph import WeightedGraph, build_tcn, graph_stats, maximum_spanning_tree, \
    mst_expansion
from skymatch.pairs import SelectionParams, select_pairs
from skymatch.sfm import BaOptions, incremental_reconstruct
from skymatch.simulate import (FlightConfig, flight_camera_poses, flight_footprints,
                               generate_flight, generate_scene, perturb_priors, rig_preset,
                               simulate_observations)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--preset", default="penta")
    parser.add_argument("--strips", type=int, default=4)
    parser.add_argument("--stations", type=int, default=6)
    parser.add_argument("--density", type=float, default=0.0005)
    parser.add_argument("--noise", type=float, default=0.5)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--with-ba", action="store_true",
                        help="run the reconstruction per ratio (slower)")
    args = parser.parse_args(argv)

    rig = rig_preset(args.preset)
    cfg = FlightConfig(height=rig.default_height, forward_overlap=rig.default_forward_overlap,
                       side_overlap=rig.default_side_overlap, strips=args.strips,
                       stations=args.stations, serpentine=False)
    images = generate_flight(cfg, rig)
    poses = flight_camera_poses(images, rig)
    intr = [rig.camera(img.camera_id).intrinsics for img in images]
    fps = flight_footprints(images, rig)
    n = len(fps)
    pairs = select_pairs(fps, SelectionParams(soc_enabled=False)).pairs
    centers = np.array([fp.center for fp in fps])
    bounds = np.array([fp.polygon.bounds for fp in fps])
    extent = (bounds[:, 0].min(), bounds[:, 1].min(), bounds[:, 2].max(), bounds[:, 3].max())
    ground = generate_scene(extent, args.density, args.seed)
    matches = simulate_observations(list(zip(poses, intr)), ground, args.noise, args.seed)
    priors = perturb_priors(poses, 0.5, 0.5, args.seed + 1)

    print(f"{args.preset} {args.strips}x{args.stations} (n={n}), "
          f"{len(pairs)} candidate pairs, {len(ground.points)} ground points")
    header = f"{'ratio':>6} {'edges':>6} {'matched':>8} {'connected':>10}"
    if args.with_ba:
        header += f" {'registered':>11} {'rmse_px':>9}"
    print(header)
    for ratio in np.arange(0.0, 1.01, 0.1):
        tcn = build_tcn(pairs, centers, float(ratio))
        expanded = mst_expansion(tcn, maximum_spanning_tree(tcn))
        matched = WeightedGraph(expanded.positions)
        for i, j, attrs in expanded.edges():
            if matches.get((i, j)):
                matched.add_edge(i, j, attrs.weight)
        connected = graph_stats(matched).largest_component
        line = (f"{ratio:>6.1f} {expanded.num_edges:>6} {matched.num_edges:>8} "
                f"{connected:>7}/{n}")
        if args.with_ba:
            result = incremental_reconstruct(expanded, matches, priors, intr,
                                             BaOptions(max_iterations=25))
            rmse = result.report.final_rmse if result.report else float("nan")
            line += f" {result.registered_count:>8}/{n} {rmse:>9.3f}"
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
