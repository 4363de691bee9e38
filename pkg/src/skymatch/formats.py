"""File formats: flight logs, pair lists, graph exports, run statistics.

All formats are plain text (CSV, DOT, PGM, JSON), written deterministically
so identical runs produce identical bytes.  See FORMATS.md at the repository
root for the normative field-by-field description.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .geometry import geodetic_to_local


class ParseError(ValueError):
    """Malformed input file; the message names the offending line/column."""


class DuplicateKeyError(ParseError):
    """A key column that must be unique repeats."""


FLIGHT_LOG_HEADER = "image_id,camera_id,x,y,z,yaw_deg,pitch_deg,roll_deg"
PAIRS_HEADER = "image_i,image_j,area_m2,angle_deg,weight"
GCP_HEADER = "point_id,x,y,z,role"
SCENE_HEADER = "point_id,x,y,z"


@dataclass(frozen=True)
class FlightLogRecord:
    """One image's platform pose sample; x/y/z are local ENU meters."""

    image_id: str
    camera_id: str
    x: float
    y: float
    z: float
    yaw_deg: float
    pitch_deg: float
    roll_deg: float


def _fmt(value) -> str:
    """Full-precision float text that parses back to the identical value."""
    return repr(float(value))


def _split_row(line: str, lineno: int, expected: int) -> list[str]:
    fields = line.split(",")
    if len(fields) != expected:
        raise ParseError(f"line {lineno}: expected {expected} fields, got {len(fields)}")
    return fields

def _parse_float(text: str, lineno: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"line {lineno}: column {column!r} is not a number: {text!r}") from None
    if not math.isfinite(value):
        raise ParseError(f"line {lineno}: column {column!r} must be finite")
    return value


def _check_header(line: str, lineno: int, expected: str):
    have = line.strip().split(",")
    want = expected.split(",")
    if have != want:
        missing = [c for c in want if c not in have]
        if missing:
            raise ParseError(f"line {lineno}: header missing column(s) {missing}")
        raise ParseError(f"line {lineno}: header {have} does not match {want}")


def parse_flight_log(path) -> list[FlightLogRecord]:
    """Read a flight log; geodetic files come back converted to local ENU.

    A comment line ``# frame=geodetic`` (before the data) marks x/y/z as
    latitude/longitude/height, converted about the first record.
    """
    geodetic = False
    records: list[FlightLogRecord] = []
    seen: set[str] = set()
    header_done = False
    raw: list[tuple[int, list[str]]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.lstrip().startswith("#"):
                if line.lstrip("# ").strip() == "frame=geodetic" and not header_done:
                    geodetic = True
                continue
            if not header_done:
                _check_header(line, lineno, FLIGHT_LOG_HEADER)
                header_done = True
                continue
            raw.append((lineno, _split_row(line, lineno, 8)))
    if not header_done:
        raise ParseError("line 1: missing header row")
    columns = FLIGHT_LOG_HEADER.split(",")
    for lineno, fields in raw:
        image_id, camera_id = fields[0], fields[1]
        if image_id in seen:
            raise DuplicateKeyError(f"line {lineno}: duplicate image_id {image_id!r}")
        seen.add(image_id)
        nums = [_parse_float(fields[k], lineno, columns[k]) for k in range(2, 8)]
        records.append(FlightLogRecord(image_id, camera_id, *nums))
    if geodetic and records:
        origin = (records[0].x, records[0].y, records[0].z)
        converted = []
        for r in records:
            enu = geodetic_to_local(r.x, r.y, r.z, origin)
            converted.append(FlightLogRecord(r.image_id, r.camera_id, enu[0], enu[1], enu[2],
                                             r.yaw_deg, r.pitch_deg, r.roll_deg))
        records = converted
    return records


def write_flight_log(records: list[FlightLogRecord], path):
    lines = [FLIGHT_LOG_HEADER]
    for r in records:
        lines.append(f"{r.image_id},{r.camera_id},{_fmt(r.x)},{_fmt(r.y)},{_fmt(r.z)},"
                     f"{_fmt(r.yaw_deg)},{_fmt(r.pitch_deg)},{_fmt(r.roll_deg)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class PairRecord:
    """One match pair row: ids, overlap area, intersection angle, edge weight."""

    image_i: str
    image_j: str
    area_m2: float
    angle_deg: float
    weight: float


def write_pairs(rows: list[PairRecord], path):
    lines = [PAIRS_HEADER]
    for r in rows:
        lines.append(f"{r.image_i},{r.image_j},{r.area_m2:.6g},{r.angle_deg:.6g},{r.weight:.6g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_pairs(path) -> list[PairRecord]:
    rows: list[PairRecord] = []
    header_done = False
    columns = PAIRS_HEADER.split(",")
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if not header_done:
                _check_header(line, lineno, PAIRS_HEADER)
                header_done = True
                continue
            fields = _split_row(line, lineno, 5)
            nums = [_parse_float(fields[k], lineno, columns[k]) for k in range(2, 5)]
            rows.append(PairRecord(fields[0], fields[1], *nums))
    if not header_done:
        raise ParseError("line 1: missing header row")
    return rows


@dataclass(frozen=True)
class GcpRecord:
    point_id: str
    x: float
    y: float
    z: float
    role: str  # control | check


def read_gcp_file(path) -> list[GcpRecord]:
    rows: list[GcpRecord] = []
    header_done = False
    seen: set[str] = set()
    columns = GCP_HEADER.split(",")
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if not header_done:
                _check_header(line, lineno, GCP_HEADER)
                header_done = True
                continue
            fields = _split_row(line, lineno, 5)
            if fields[0] in seen:
                raise DuplicateKeyError(f"line {lineno}: duplicate point_id {fields[0]!r}")
            seen.add(fields[0])
            if fields[4] not in ("control", "check"):
                raise ParseError(f"line {lineno}: role must be control or check, got {fields[4]!r}")
            nums = [_parse_float(fields[k], lineno, columns[k]) for k in range(1, 4)]
            rows.append(GcpRecord(fields[0], *nums, role=fields[4]))
    if not header_done:
        raise ParseError("line 1: missing header row")
    return rows


def write_gcp_file(rows: list[GcpRecord], path):
    lines = [GCP_HEADER]
    for r in rows:
        lines.append(f"{r.point_id},{_fmt(r.x)},{_fmt(r.y)},{_fmt(r.z)},{r.role}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_scene_points(points, path):
    lines = [SCENE_HEADER]
    for k, p in enumerate(points):
        lines.append(f"p{k:06d},{_fmt(p[0])},{_fmt(p[1])},{_fmt(p[2])}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_scene_points(path):
    import numpy as np

    pts = []
    header_done = False
    columns = SCENE_HEADER.split(",")
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if not header_done:
                _check_header(line, lineno, SCENE_HEADER)
                header_done = True
                continue
            fields = _split_row(line, lineno, 4)
            pts.append([_parse_float(fields[k], lineno, columns[k]) for k in range(1, 4)])
    if not header_done:
        raise ParseError("line 1: missing header row")
    return np.array(pts, dtype=float).reshape(-1, 3)


def export_dot(graph, path, labels: list[str] | None = None):
    """Graphviz text for an undirected graph, node positions in meters."""
    names = labels if labels is not None else [f"v{k}" for k in range(graph.n)]
    lines = ["graph G {", "  node [shape=point];"]
    for v in range(graph.n):
        x, y = graph.positions[v]
        lines.append(f'  "{names[v]}" [pos="{x:.6g},{y:.6g}"];')
    for i, j, attrs in graph.edges():
        lines.append(f'  "{names[i]}" -- "{names[j]}" [label="{attrs.weight:.6g}"];')
    lines.append("}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def export_adjacency_pgm(graph, path):
    """Plain-text PGM of the weight matrix, cell = round(255 * weight)."""
    n = graph.n
    if n < 1:
        raise ValueError("adjacency image needs at least one vertex")
    grid = [[0] * n for _ in range(n)]
    for i, j, attrs in graph.edges():
        value = round(255 * attrs.weight)
        grid[i][j] = value
        grid[j][i] = value
    lines = ["P2", f"{n} {n}", "255"]
    lines.extend(" ".join(str(v) for v in row) for row in grid)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass
class PipelineStats:
    """Fixed-schema run statistics; unknown fields stay at zero."""

    pairs_full: int = 0
    pairs_reduced: int = 0
    pairs_graph: int = 0
    reduction_ratio: float = 0.0
    tests_per_image_mean: float = 0.0
    components: int = 0
    registered_images: int = 0
    rmse_px: float = 0.0
    wall_ms: dict[str, float] = field(default_factory=dict)


def write_stats_json(stats: PipelineStats, path):
    Path(path).write_text(json.dumps(asdict(stats), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def read_stats_json(path) -> PipelineStats:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return PipelineStats(**data)
