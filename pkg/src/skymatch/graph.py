"""Image connection graphs: weighted network, spanning tree, expansion.

The connection network is an undirected graph with one vertex per image at
its footprint center.  Edge weights blend normalized overlap area with the
cosine of the intersection angle, so that both large overlaps and small
perspective differences rank a pair highly.  A maximum spanning tree keeps
the strongest backbone; the expansion stage then restores cross-strip
connections orthogonal to each vertex's local spanning direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple

import numpy as np

from .pairs import CandidatePair


class EdgeAttrs(NamedTuple):
    weight: float
    area: float
    angle_deg: float


class WeightedGraph:
    """Undirected weighted graph over images located at 2D ground positions."""

    def __init__(self, positions):
        positions = np.asarray(positions, dtype=float).reshape(-1, 2)
        self.positions = positions
        self.n = len(positions)
        self._edges: dict[tuple[int, int], EdgeAttrs] = {}
        self._adj: list[set[int]] = [set() for _ in range(self.n)]

    def add_edge(self, i: int, j: int, weight: float, area: float = 0.0, angle_deg: float = 0.0):
        if i == j:
            raise ValueError("self-loops are not allowed")
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise ValueError(f"edge ({i}, {j}) outside vertex range")
        if not 0.0 <= weight <= 1.0:
            raise ValueError(f"edge weight {weight} outside [0, 1]")
        key = (i, j) if i < j else (j, i)
        if key in self._edges:
            raise ValueError(f"duplicate edge {key}")
        self._edges[key] = EdgeAttrs(weight, area, angle_deg)
        self._adj[i].add(j)
        self._adj[j].add(i)

    def has_edge(self, i: int, j: int) -> bool:
        return ((i, j) if i < j else (j, i)) in self._edges

    def edge(self, i: int, j: int) -> EdgeAttrs:
        return self._edges[(i, j) if i < j else (j, i)]

    def neighbors(self, v: int) -> list[int]:
        return sorted(self._adj[v])

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def edges(self) -> list[tuple[int, int, EdgeAttrs]]:
        return [(i, j, self._edges[(i, j)]) for i, j in sorted(self._edges)]

    @property
    def num_edges(self) -> int:
        return len(self._edges)

    @property
    def total_weight(self) -> float:
        return math.fsum(attrs.weight for attrs in self._edges.values())

    def copy(self) -> "WeightedGraph":
        g = WeightedGraph(self.positions)
        for (i, j), attrs in self._edges.items():
            g.add_edge(i, j, *attrs)
        return g


@dataclass(frozen=True)
class WeightParams:
    weight_ratio: float = 0.6
    area_max: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.weight_ratio <= 1.0:
            raise ValueError("weight_ratio must be in [0, 1]")
        if self.area_max <= 0.0:
            raise ValueError("area_max must be positive")


def edge_weight(area: float, angle_deg: float, params: WeightParams) -> float:
    """Blend of area / area_max and cos(angle); the angle term zeroes past 90 degrees."""
    if area < 0.0:
        raise ValueError("area must be nonnegative")
    if area > params.area_max:
        raise ValueError(f"area {area} exceeds area_max {params.area_max}")
    if not 0.0 <= angle_deg <= 180.0:
        raise ValueError("angle must be in [0, 180] degrees")
    w_angle = math.cos(math.radians(angle_deg)) if angle_deg <= 90.0 else 0.0
    return params.weight_ratio * (area / params.area_max) + (1.0 - params.weight_ratio) * w_angle


def build_tcn(pairs: Iterable[CandidatePair], positions, weight_ratio: float = 0.6) -> WeightedGraph:
    """Connection network with one vertex per image and one edge per pair.

    Areas are normalized by the maximum area over exactly this pair set.
    """
    pairs = list(pairs)
    g = WeightedGraph(positions)
    if not pairs:
        return g
    params = WeightParams(weight_ratio, max(p.overlap_area for p in pairs))
    for p in pairs:
        g.add_edge(p.i, p.j, edge_weight(p.overlap_area, p.angle_deg, params),
                   area=p.overlap_area, angle_deg=p.angle_deg)
    return g


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def maximum_spanning_tree(g: WeightedGraph) -> WeightedGraph:
    """Kruskal on negated weights; a forest when the input is disconnected.

    Edges are taken in (weight descending, i ascending, j ascending) order,
    which makes the result deterministic under weight ties.
    """
    tree = WeightedGraph(g.positions)
    uf = _UnionFind(g.n)
    ranked = sorted(g.edges(), key=lambda e: (-e[2].weight, e[0], e[1]))
    for i, j, attrs in ranked:
        if uf.union(i, j):
            tree.add_edge(i, j, *attrs)
    return tree


def connected_components(g: WeightedGraph) -> list[list[int]]:
    """Vertex sets of each component, largest first (ties by smallest member)."""
    uf = _UnionFind(g.n)
    for i, j, _ in g.edges():
        uf.union(i, j)
    groups: dict[int, list[int]] = {}
    for v in range(g.n):
        groups.setdefault(uf.find(v), []).append(v)
    return sorted(groups.values(), key=lambda c: (-len(c), c[0]))


@dataclass(frozen=True)
class GraphStats:
    vertex_count: int
    edge_count: int
    mean_degree: float
    components: int
    largest_component: int
    total_weight: float


def graph_stats(g: WeightedGraph) -> GraphStats:
    comps = connected_components(g) if g.n else []
    return GraphStats(
        vertex_count=g.n,
        edge_count=g.num_edges,
        mean_degree=2.0 * g.num_edges / g.n if g.n else 0.0,
        components=len(comps),
        largest_component=len(comps[0]) if comps else 0,
        total_weight=g.total_weight,
    )


class LocalAxes(NamedTuple):
    spanning_dir: np.ndarray   # unit 2-vector, defined up to sign
    expansion_dir: np.ndarray  # unit 2-vector, defined up to sign
    ev_max: float
    ev_min: float


def local_axes(vertex: int, g: WeightedGraph) -> LocalAxes:
    """Principal axes of the vertex plus its incident neighbors.

    The covariance of the ground positions separates the direction the local
    connections already span (largest eigenvalue) from the direction worth
    expanding into (smallest eigenvalue).
    """
    nbrs = g.neighbors(vertex)
    if not nbrs:
        raise ValueError(f"vertex {vertex} has no incident neighbors")
    pts = g.positions[[vertex] + nbrs]
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered / len(pts)
    evals, evecs = np.linalg.eigh(cov)
    ev_min = max(0.0, float(evals[0]))
    ev_max = max(0.0, float(evals[1]))
    return LocalAxes(evecs[:, 1], evecs[:, 0], ev_max, ev_min)


class Region(Enum):
    NONE = "none"
    SIDE_PLUS = "side_plus"
    SIDE_MINUS = "side_minus"


def in_expansion_region(center, expansion_dir, angle_deg: float, candidate) -> Region:
    """Classify a candidate into the two wedges around +/- expansion_dir.

    A candidate belongs to a side when its direction from the center is
    within angle_deg of that side's axis, boundary inclusive.
    """
    d = np.asarray(candidate, dtype=float) - np.asarray(center, dtype=float)
    norm = float(np.linalg.norm(d))
    if norm <= 1e-12:
        raise ValueError("candidate coincides with the region center")
    e = np.asarray(expansion_dir, dtype=float)
    e = e / np.linalg.norm(e)
    cos_to_plus = float(np.dot(d, e)) / norm
    threshold = math.cos(math.radians(angle_deg)) - 1e-12
    if cos_to_plus >= threshold:
        return Region.SIDE_PLUS
    if -cos_to_plus >= threshold:
        return Region.SIDE_MINUS
    return Region.NONE


@dataclass(frozen=True)
class ExpansionParams:
    eigen_ratio: float = 3.0
    expansion_angle_deg: float = 45.0
    expansion_threshold: int = 1

    def __post_init__(self):
        if self.eigen_ratio < 1.0:
            raise ValueError("eigen_ratio must be >= 1")
        if not 0.0 < self.expansion_angle_deg < 90.0:
            raise ValueError("expansion_angle_deg must be in (0, 90)")
        if self.expansion_threshold < 1:
            raise ValueError("expansion_threshold must be >= 1")


class ExpansionStep(NamedTuple):
    vertex: int
    neighbor: int
    region: Region
    expansion_dir: np.ndarray


def mst_expansion(
    tcn: WeightedGraph,
    mst: WeightedGraph,
    params: ExpansionParams | None = None,
    log: list[ExpansionStep] | None = None,
) -> WeightedGraph:
    """Add cross-direction connections to a spanning tree, vertex by vertex.

    For each vertex in ascending order the local axes are computed on the
    progressively expanded graph, so additions made at earlier vertices are
    visible to later ones.  A vertex is skipped when its neighborhood is not
    elongated (eigenvalue ratio at or below the threshold; a degenerate
    zero minimum counts as infinitely elongated) or when both wedge regions
    already hold enough connections.  Candidate edges come from the full
    network, strongest weight first, and carry their network attributes.
    """
    params = params or ExpansionParams()
    if mst.n != tcn.n or not np.array_equal(mst.positions, tcn.positions):
        raise ValueError("spanning tree and network must share the same vertex set")
    expanded = mst.copy()
    target = params.expansion_threshold
    for v in range(expanded.n):
        nbrs = expanded.neighbors(v)
        if not nbrs:
            continue
        axes = local_axes(v, expanded)
        if axes.ev_max <= params.eigen_ratio * axes.ev_min:
            continue
        center = expanded.positions[v]
        counts = {Region.SIDE_PLUS: 0, Region.SIDE_MINUS: 0}
        for u in nbrs:
            region = in_expansion_region(center, axes.expansion_dir,
                                         params.expansion_angle_deg, expanded.positions[u])
            if region is not Region.NONE:
                counts[region] += 1
        if counts[Region.SIDE_PLUS] >= target and counts[Region.SIDE_MINUS] >= target:
            continue
        candidates = {Region.SIDE_PLUS: [], Region.SIDE_MINUS: []}
        for u in tcn.neighbors(v):
            if expanded.has_edge(v, u):
                continue
            region = in_expansion_region(center, axes.expansion_dir,
                                         params.expansion_angle_deg, tcn.positions[u])
            if region is not Region.NONE:
                candidates[region].append(u)
        for region in (Region.SIDE_PLUS, Region.SIDE_MINUS):
            if counts[region] >= target:
                continue
            ranked = sorted(candidates[region], key=lambda u: (-tcn.edge(v, u).weight, u))
            for u in ranked:
                if counts[region] >= target:
                    break
                expanded.add_edge(v, u, *tcn.edge(v, u))
                counts[region] += 1
                if log is not None:
                    log.append(ExpansionStep(v, u, region, axes.expansion_dir))
    return expanded
