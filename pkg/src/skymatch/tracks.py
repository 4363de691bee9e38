"""Tie multi-pair pixel correspondences into tracks.

Correspondences are pixel<->pixel per image pair; observations of the same
physical feature carry bit-identical pixel coordinates across pairs, so the
(image, pixel) tuple identifies a feature node.  Union-find over those nodes
yields connected components; components that map two different features of
one image together are contradictory and dropped whole.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class Track:
    """Observations (camera index, pixel) of one scene point, one per camera."""

    observations: tuple[tuple[int, tuple[float, float]], ...]

    def __post_init__(self):
        if len(self.observations) < 2:
            raise ValueError("a track needs at least two observations")
        cams = [c for c, _ in self.observations]
        if len(set(cams)) != len(cams):
            raise ValueError("a track may observe each camera at most once")

    def cameras(self) -> list[int]:
        return [c for c, _ in self.observations]

    def pixel(self, camera: int) -> np.ndarray:
        for c, px in self.observations:
            if c == camera:
                return np.array(px)
        raise KeyError(camera)


class UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def build_tracks(
    matches: Mapping[tuple[int, int], Sequence[tuple]],
) -> list[Track]:
    """Union pixel correspondences across pairs into per-point tracks.

    Tracks shorter than two observations are dropped, as are components in
    which one image contributes two distinct features (a contradiction the
    pairwise matches cannot both be right about).
    """
    uf = UnionFind()
    for (img_a, img_b), corr in matches.items():
        for pix_a, pix_b in corr:
            node_a = (img_a, float(pix_a[0]), float(pix_a[1]))
            node_b = (img_b, float(pix_b[0]), float(pix_b[1]))
            uf.union(node_a, node_b)
    groups: dict[tuple, list[tuple]] = {}
    for node in uf.parent:
        groups.setdefault(uf.find(node), []).append(node)
    tracks = []
    for nodes in groups.values():
        cams = [n[0] for n in nodes]
        if len(nodes) < 2 or len(set(cams)) != len(cams):
            continue
        obs = tuple(sorted((img, (x, y)) for img, x, y in nodes))
        tracks.append(Track(obs))
    tracks.sort(key=lambda t: t.observations)
    return tracks
