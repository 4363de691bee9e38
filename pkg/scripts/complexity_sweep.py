#!/usr/bin/env python3
"""Intersection-test complexity: distance-ordered selection vs all pairs.

Sweeps square grids at constant footprint density and reports the mean
number of per-image intersection tests for the early-terminating selection
against the quadratic all-pairs baseline.
"""

import argparse
import sys
import time

import numpy as np

from skymatch.geometry import Intrinsics, mount_from_angles
from skymatch.pairs import SelectionParams, select_pairs
from skymatch.simulate import (FlightConfig, RigCamera, RigPreset, flight_footprints,
                               generate_flight, rig_preset)


def build_rig(name: str) -> RigPreset:
    if name == "nadir":
        return RigPreset("nadir", (
            RigCamera("cam0", mount_from_angles(0.0, 0.0),
                      Intrinsics(35.0, 35.8, 23.9, 6000, 4000)),
        ), default_height=100.0, default_forward_overlap=0.6, default_side_overlap=0.4)
    return rig_preset(name)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rig", default="nadir",
                        choices=["nadir", "single-oblique", "dual", "penta"])
    parser.add_argument("--sides", type=int, nargs="+", default=[10, 15, 20, 25, 30])
    parser.add_argument("--forward-overlap", type=float, default=None)
    parser.add_argument("--side-overlap", type=float, default=None)
    args = parser.parse_args(argv)

    rig = build_rig(args.rig)
    fw = args.forward_overlap if args.forward_overlap is not None else rig.default_forward_overlap
    sd = args.side_overlap if args.side_overlap is not None else rig.default_side_overlap
    print(f"rig {rig.name}, overlaps {fw:.0%}/{sd:.0%}, {len(rig.cameras)} camera(s)")
    print(f"{'grid':>8} {'images':>7} {'pairs':>8} {'tests/img':>10} "
          f"{'all-pairs/img':>14} {'seconds':>8}")
    for side in args.sides:
        cfg = FlightConfig(height=rig.default_height, forward_overlap=fw, side_overlap=sd,
                           strips=side, stations=side)
        fps = flight_footprints(generate_flight(cfg, rig), rig)
        started = time.perf_counter()
        result = select_pairs(fps, SelectionParams(soc_enabled=False))
        elapsed = time.perf_counter() - started
        n = len(fps)
        print(f"{side:>4}x{side:<3} {n:>7} {len(result.pairs):>8} "
              f"{result.mean_tests:>10.1f} {n - 1:>14} {elapsed:>8.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
