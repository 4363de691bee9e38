"""Synthetic-scene verification backend: reprojection objective, bundle
adjustment, triangulation, and an incremental reconstruction driver.

The optimizer is a Levenberg-Marquardt loop over camera rotations (minimal
3-vector increments applied on the left), camera centers, and 3D points,
with fixed intrinsics.  The analytic Jacobian is assembled sparse and the
damped normal equations are solved directly; the free-gauge directions of a
relative adjustment are controlled by fixing the first camera and
renormalizing the scale against the first baseline after each accepted step
(a pure gauge move: it cannot change the cost).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .geometry import CameraPose, Intrinsics, rotation_from_rotvec
from .graph import WeightedGraph, connected_components
from .tracks import Track, build_tracks


class BehindCameraError(ValueError):
    """A point projects with nonpositive depth."""


class TriangulationError(ValueError):
    """Rays are parallel or share an origin; no stable intersection exists."""


class SingularSystemError(RuntimeError):
    """The damped normal equations could not be solved."""


class Camera(NamedTuple):
    pose: CameraPose
    intrinsics: Intrinsics


@dataclass
class Scene:
    """Cameras, 3D points, and pixel observations tying them together.

    Observation k says: point ``point_indices[k]`` was seen in camera
    ``camera_indices[k]`` at ``pixels[k]``.  Visibility is exactly the set of
    observations; there is no separate indicator storage.
    """

    cameras: list[Camera]
    points: np.ndarray           # (p, 3)
    camera_indices: np.ndarray   # (m,)
    point_indices: np.ndarray    # (m,)
    pixels: np.ndarray           # (m, 2)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        self.camera_indices = np.asarray(self.camera_indices, dtype=int).ravel()
        self.point_indices = np.asarray(self.point_indices, dtype=int).ravel()
        self.pixels = np.asarray(self.pixels, dtype=float).reshape(-1, 2)
        m = len(self.pixels)
        if len(self.camera_indices) != m or len(self.point_indices) != m:
            raise ValueError("observation arrays must share one length")
        if m:
            if self.camera_indices.min() < 0 or self.camera_indices.max() >= len(self.cameras):
                raise ValueError("camera index out of range")
            if self.point_indices.min() < 0 or self.point_indices.max() >= len(self.points):
                raise ValueError("point index out of range")
            for k in np.unique(self.camera_indices):
                intr = self.cameras[k].intrinsics
                margin = 0.1 * max(intr.image_width_px, intr.image_height_px)
                px = self.pixels[self.camera_indices == k]
                if (px[:, 0].min() < -margin or px[:, 0].max() > intr.image_width_px + margin
                        or px[:, 1].min() < -margin or px[:, 1].max() > intr.image_height_px + margin):
                    raise ValueError(f"observations fall outside camera {k} image bounds + margin")

    @property
    def num_observations(self) -> int:
        return len(self.pixels)

    def copy(self) -> "Scene":
        return Scene(list(self.cameras), self.points.copy(), self.camera_indices.copy(),
                     self.point_indices.copy(), self.pixels.copy())


def scene_from_tracks(cameras: Sequence[Camera], tracks: Sequence[Track], points) -> Scene:
    cam_idx, pt_idx, pixels = [], [], []
    for t, track in enumerate(tracks):
        for cam, pix in track.observations:
            cam_idx.append(cam)
            pt_idx.append(t)
            pixels.append(pix)
    return Scene(list(cameras), points, np.array(cam_idx, dtype=int),
                 np.array(pt_idx, dtype=int), np.array(pixels, dtype=float))


def project_point(camera: Camera, point) -> np.ndarray:
    """Pinhole projection of a world point; the point must be in front."""
    pose, intr = camera
    xc = pose.rotation @ (np.asarray(point, dtype=float) - pose.translation)
    if xc[2] <= 0.0:
        raise BehindCameraError(f"point {point} has nonpositive depth in camera {pose.camera_id!r}")
    cx, cy = intr.principal_point_px
    return np.array([cx + intr.focal_px_x * xc[0] / xc[2],
                     cy + intr.focal_px_y * xc[1] / xc[2]])


def _camera_arrays(cameras: Sequence[Camera]):
    rot = np.stack([c.pose.rotation for c in cameras])
    cen = np.stack([c.pose.translation for c in cameras])
    fx = np.array([c.intrinsics.focal_px_x for c in cameras])
    fy = np.array([c.intrinsics.focal_px_y for c in cameras])
    pp = np.array([c.intrinsics.principal_point_px for c in cameras])
    return rot, cen, fx, fy, pp


def _project_all(scene: Scene):
    """Camera-frame coordinates and residuals for every observation."""
    rot, cen, fx, fy, pp = _camera_arrays(scene.cameras)
    ci, pi = scene.camera_indices, scene.point_indices
    xc = np.einsum("mij,mj->mi", rot[ci], scene.points[pi] - cen[ci])
    depth = xc[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = pp[ci, 0] + fx[ci] * xc[:, 0] / depth
        v = pp[ci, 1] + fy[ci] * xc[:, 1] / depth
    res = np.stack([u, v], axis=1) - scene.pixels
    return xc, res


def reprojection_cost(scene: Scene) -> tuple[float, float, np.ndarray]:
    """Sum of squared pixel errors, per-coordinate RMSE, and the residual vector.

    RMSE divides by twice the observation count (one slot per pixel
    coordinate) so isotropic noise of sigma pixels yields an RMSE near sigma.
    """
    if scene.num_observations == 0:
        return 0.0, 0.0, np.zeros(0)
    xc, res = _project_all(scene)
    bad = np.nonzero(xc[:, 2] <= 0.0)[0]
    if len(bad):
        pairs = [(int(scene.point_indices[k]), int(scene.camera_indices[k])) for k in bad[:8]]
        raise BehindCameraError(f"observations with nonpositive depth (point, camera): {pairs}")
    cost = float(np.sum(res * res))
    rmse = math.sqrt(cost / (2.0 * scene.num_observations))
    return cost, rmse, res.ravel()


@dataclass(frozen=True)
class BaOptions:
    max_iterations: int = 100
    cost_tolerance: float = 1e-10    # relative decrease per accepted step
    damping_init: float = 1e-4
    local_batch: int = 5
    fixed_cameras: frozenset[int] = field(default_factory=frozenset)
    fixed_points: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.cost_tolerance <= 0.0:
            raise ValueError("cost_tolerance must be positive")
        if self.max_iterations < 1 or self.local_batch < 1:
            raise ValueError("max_iterations and local_batch must be >= 1")


@dataclass
class BaReport:
    initial_rmse: float
    final_rmse: float
    iterations: int
    rejected: int
    converged: bool
    residual_norms: np.ndarray
    cost_trace: list[float]


def _skew_batch(v: np.ndarray) -> np.ndarray:
    out = np.zeros((len(v), 3, 3))
    out[:, 0, 1] = -v[:, 2]
    out[:, 0, 2] = v[:, 1]
    out[:, 1, 0] = v[:, 2]
    out[:, 1, 2] = -v[:, 0]
    out[:, 2, 0] = -v[:, 1]
    out[:, 2, 1] = v[:, 0]
    return out


def _jacobian(scene: Scene, free_cams: list[int], free_pts: np.ndarray) -> sparse.csr_matrix:
    """Analytic sparse Jacobian of the stacked residual vector.

    Columns: [3 rotation + 3 center] per free camera, then 3 per free point.
    Rotation columns differentiate R <- exp(omega) R at omega = 0.
    """
    rot, cen, fx, fy, pp = _camera_arrays(scene.cameras)
    ci, pi = scene.camera_indices, scene.point_indices
    m = scene.num_observations
    xc = np.einsum("mij,mj->mi", rot[ci], scene.points[pi] - cen[ci])
    z = xc[:, 2]
    a = np.zeros((m, 2, 3))
    a[:, 0, 0] = fx[ci] / z
    a[:, 0, 2] = -fx[ci] * xc[:, 0] / (z * z)
    a[:, 1, 1] = fy[ci] / z
    a[:, 1, 2] = -fy[ci] * xc[:, 1] / (z * z)
    d_point = np.einsum("mab,mbc->mac", a, rot[ci])       # dres/dX
    d_omega = -np.einsum("mab,mbc->mac", a, _skew_batch(xc))

    cam_slot = -np.ones(len(scene.cameras), dtype=int)
    for s, c in enumerate(free_cams):
        cam_slot[c] = s
    pt_slot = -np.ones(len(scene.points), dtype=int)
    pt_slot[free_pts] = np.arange(len(free_pts))
    ncols = 6 * len(free_cams) + 3 * len(free_pts)

    rows, cols, data = [], [], []
    row_pair = np.broadcast_to(
        (2 * np.arange(m)[:, None, None] + np.array([0, 1])[None, :, None]), (m, 2, 3))

    sel = cam_slot[ci] >= 0
    if np.any(sel):
        k = int(sel.sum())
        base = 6 * cam_slot[ci[sel]]
        r = np.broadcast_to(row_pair[sel], (k, 2, 3))
        c_om = np.broadcast_to(base[:, None, None] + np.arange(3)[None, None, :], (k, 2, 3))
        rows.append(r.ravel())
        cols.append(c_om.ravel())
        data.append(d_omega[sel].ravel())
        c_ce = np.broadcast_to(base[:, None, None] + 3 + np.arange(3)[None, None, :], (k, 2, 3))
        rows.append(r.ravel())
        cols.append(c_ce.ravel())
        data.append((-d_point[sel]).ravel())

    sel = pt_slot[pi] >= 0
    if np.any(sel):
        k = int(sel.sum())
        base = 6 * len(free_cams) + 3 * pt_slot[pi[sel]]
        r = np.broadcast_to(row_pair[sel], (k, 2, 3))
        c_pt = np.broadcast_to(base[:, None, None] + np.arange(3)[None, None, :], (k, 2, 3))
        rows.append(r.ravel())
        cols.append(c_pt.ravel())
        data.append(d_point[sel].ravel())

    if rows:
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        data = np.concatenate(data)
    else:
        rows = cols = data = np.zeros(0)
    return sparse.coo_matrix((data, (rows, cols)), shape=(2 * m, ncols)).tocsr()


def _apply_step(scene: Scene, delta: np.ndarray, free_cams: list[int], free_pts: np.ndarray) -> Scene:
    out = scene.copy()
    for s, c in enumerate(free_cams):
        omega = delta[6 * s:6 * s + 3]
        dc = delta[6 * s + 3:6 * s + 6]
        pose = out.cameras[c].pose
        new_pose = CameraPose(rotation_from_rotvec(omega) @ pose.rotation,
                              pose.translation + dc, pose.camera_id, pose.station_id)
        out.cameras[c] = Camera(new_pose, out.cameras[c].intrinsics)
    if len(free_pts):
        out.points[free_pts] += delta[6 * len(free_cams):].reshape(-1, 3)
    return out


def _rescale_about(scene: Scene, anchor: int, factor: float) -> Scene:
    """Uniform scaling about one camera center: a pure gauge transform."""
    out = scene.copy()
    origin = out.cameras[anchor].pose.translation
    for c, cam in enumerate(out.cameras):
        if c == anchor:
            continue
        pose = cam.pose
        new_c = origin + factor * (pose.translation - origin)
        out.cameras[c] = Camera(CameraPose(pose.rotation, new_c, pose.camera_id, pose.station_id),
                                cam.intrinsics)
    out.points = origin + factor * (out.points - origin)
    return out


def bundle_adjust(scene: Scene, opts: BaOptions | None = None) -> tuple[Scene, BaReport]:
    """Minimize the reprojection objective; returns a new scene and a report.

    Accepted steps never increase the cost; a rejected trial raises the
    damping and retries.  Cameras/points named in the options stay exactly
    fixed.  When nothing pins the gauge, camera 0 is held and the distance
    from it to the next adjustable camera is restored after every accepted
    step.
    """
    opts = opts or BaOptions()
    if len(scene.cameras) < 2:
        raise ValueError("bundle adjustment needs at least two cameras")
    fixed_cams = set(opts.fixed_cameras)
    fixed_pts = set(opts.fixed_points)
    if not fixed_cams and len(fixed_pts) < 3:
        fixed_cams = {0}
    free_cams = [c for c in range(len(scene.cameras)) if c not in fixed_cams]
    free_pts = np.array([p for p in range(len(scene.points)) if p not in fixed_pts], dtype=int)
    counts = np.bincount(scene.point_indices, minlength=len(scene.points))
    if len(free_pts) and counts[free_pts].min() < 2:
        raise ValueError("every adjustable point needs at least two observations")

    scale_anchored = len(fixed_cams) >= 2 or len(fixed_pts) >= 3
    anchor = min(fixed_cams) if fixed_cams else 0
    partner = next((c for c in range(len(scene.cameras)) if c != anchor and c in free_cams), None)
    baseline0 = (float(np.linalg.norm(scene.cameras[partner].pose.translation
                                      - scene.cameras[anchor].pose.translation))
                 if partner is not None else 0.0)

    current = scene.copy()
    cost, rmse0, _ = reprojection_cost(current)
    trace = [cost]
    lam = opts.damping_init
    accepted = rejected = 0
    converged = False
    while accepted + rejected < opts.max_iterations:
        if cost <= 1e-28:
            converged = True
            break
        jac = _jacobian(current, free_cams, free_pts)
        _, res = _project_all(current)
        r = res.ravel()
        grad = jac.T @ r
        hess = (jac.T @ jac).tocsc()
        diag = np.maximum(hess.diagonal(), 1e-12)
        stepped = False
        while lam <= 1e14:
            system = (hess + lam * sparse.diags(diag)).tocsc()
            delta = spsolve(system, -grad)
            if not np.all(np.isfinite(delta)):
                raise SingularSystemError("damped normal equations produced a non-finite step")
            trial = _apply_step(current, delta, free_cams, free_pts)
            if not scale_anchored and baseline0 > 1e-12:
                d = float(np.linalg.norm(trial.cameras[partner].pose.translation
                                         - trial.cameras[anchor].pose.translation))
                if d > 1e-12:
                    trial = _rescale_about(trial, anchor, baseline0 / d)
            try:
                trial_cost, _, _ = reprojection_cost(trial)
            except BehindCameraError:
                trial_cost = math.inf
            if trial_cost < cost:
                decrease = cost - trial_cost
                current, cost = trial, trial_cost
                trace.append(cost)
                accepted += 1
                lam = max(lam / 3.0, 1e-12)
                stepped = True
                if decrease <= opts.cost_tolerance * max(trace[-2], 1e-300):
                    converged = True
                break
            rejected += 1
            lam *= 5.0
            if accepted + rejected >= opts.max_iterations:
                break
        if not stepped:
            # No damping level could improve the cost: we are pinned at a
            # minimum within float precision (unless the iteration budget
            # ran out mid-search).
            converged = converged or lam > 1e14
            break
        if converged:
            break

    _, final_rmse, res = reprojection_cost(current)
    norms = np.linalg.norm(res.reshape(-1, 2), axis=1) if len(res) else np.zeros(0)
    if cost <= 1e-28:
        converged = True
    return current, BaReport(rmse0, final_rmse, accepted, rejected, converged, norms, trace)


def bundle_adjust_gcp(scene: Scene, gcp_indices: Sequence[int], gcp_coords,
                      opts: BaOptions | None = None) -> tuple[Scene, BaReport]:
    """Adjust with ground control: the named points are pinned to the given
    coordinates and every camera stays free, so the result is geo-referenced.
    """
    opts = opts or BaOptions()
    gcp_indices = list(gcp_indices)
    coords = np.asarray(gcp_coords, dtype=float).reshape(-1, 3)
    if len(gcp_indices) != len(coords):
        raise ValueError("one coordinate triple per control point index")
    if len(gcp_indices) < 3:
        raise ValueError("absolute orientation needs at least 3 control points")
    centered = coords - coords.mean(axis=0)
    svals = np.linalg.svd(centered, compute_uv=False)
    if svals[1] <= 1e-9 * max(1.0, svals[0]):
        raise ValueError("control points are collinear; orientation is under-constrained")
    pinned = scene.copy()
    pinned.points[gcp_indices] = coords
    opts = replace(opts, fixed_points=frozenset(gcp_indices), fixed_cameras=frozenset())
    return bundle_adjust(pinned, opts)


def triangulate(track: Track, cameras: Sequence[Camera]) -> np.ndarray:
    """Midpoint intersection of the observation rays, polished on reprojection."""
    origins, dirs = [], []
    for cam_idx, pix in track.observations:
        pose, intr = cameras[cam_idx]
        cx, cy = intr.principal_point_px
        d_cam = np.array([(pix[0] - cx) * intr.pixel_pitch_x_mm,
                          (pix[1] - cy) * intr.pixel_pitch_y_mm,
                          intr.focal_mm])
        d = pose.rotation.T @ d_cam
        dirs.append(d / np.linalg.norm(d))
        origins.append(pose.translation)
    origins = np.array(origins)
    dirs = np.array(dirs)
    if max(np.linalg.norm(origins - origins[0], axis=1)) <= 1e-9:
        raise TriangulationError("observation rays share one projection center")
    m = np.zeros((3, 3))
    b = np.zeros(3)
    for o, d in zip(origins, dirs):
        proj = np.eye(3) - np.outer(d, d)
        m += proj
        b += proj @ o
    evals = np.linalg.eigvalsh(m)
    if evals[0] <= 1e-12 * max(1.0, evals[-1]):
        raise TriangulationError("observation rays are parallel")
    point = np.linalg.solve(m, b)
    cams = [cameras[c] for c, _ in track.observations]
    pix = np.array([p for _, p in track.observations], dtype=float)
    for _ in range(10):
        try:
            res = np.array([project_point(cam, point) for cam in cams]) - pix
        except BehindCameraError:
            break
        jac = np.zeros((2 * len(cams), 3))
        for k, cam in enumerate(cams):
            pose, intr = cam
            xc = pose.rotation @ (point - pose.translation)
            a = np.array([[intr.focal_px_x / xc[2], 0.0, -intr.focal_px_x * xc[0] / xc[2] ** 2],
                          [0.0, intr.focal_px_y / xc[2], -intr.focal_px_y * xc[1] / xc[2] ** 2]])
            jac[2 * k:2 * k + 2] = a @ pose.rotation
        step = np.linalg.solve(jac.T @ jac + 1e-12 * np.eye(3), -jac.T @ res.ravel())
        point = point + step
        if np.linalg.norm(step) < 1e-12:
            break
    return point


@dataclass
class ReconstructionResult:
    scene: Scene
    image_order: list[int]        # scene camera slot -> input image index
    unregistered: list[int]
    stage_rmse: list[tuple[str, float]]
    report: BaReport | None

    @property
    def registered_count(self) -> int:
        return len(self.image_order)


def incremental_reconstruct(
    graph: WeightedGraph,
    matches: dict[tuple[int, int], list],
    priors: Sequence[CameraPose],
    intrinsics: Sequence[Intrinsics],
    opts: BaOptions | None = None,
    min_edge_matches: int = 1,
) -> ReconstructionResult:
    """Register images over the match graph and refine with staged adjustments.

    Registration walks the graph breadth-first from the strongest usable edge
    (edges without matches cannot support registration), initializing every
    camera from its prior pose.  New tracks are triangulated as both of their
    first images arrive; a local adjustment runs each time ``local_batch``
    images have been added, and a global one finishes the run.  When the
    usable graph is disconnected only the largest component is reconstructed
    and the remainder is reported as unregistered.
    """
    opts = opts or BaOptions()
    if len(priors) != graph.n or len(intrinsics) != graph.n:
        raise ValueError("need one prior pose and one intrinsics per graph vertex")
    usable = WeightedGraph(graph.positions)
    norm_matches: dict[tuple[int, int], list] = {}
    for i, j, attrs in graph.edges():
        corr = matches.get((i, j), matches.get((j, i), []))
        if (j, i) in matches and (i, j) not in matches:
            corr = [(b, a) for a, b in corr]
        if len(corr) >= min_edge_matches:
            usable.add_edge(i, j, *attrs)
            norm_matches[(i, j)] = list(corr)

    empty = Scene([], np.zeros((0, 3)), np.zeros(0, dtype=int), np.zeros(0, dtype=int), np.zeros((0, 2)))
    if usable.num_edges == 0:
        return ReconstructionResult(empty, [], list(range(graph.n)), [], None)

    comp = next(c for c in connected_components(usable) if len(c) >= 2)
    comp_set = set(comp)
    seed = min(((i, j) for i, j, _ in usable.edges() if i in comp_set),
               key=lambda e: (-usable.edge(*e).weight, e))

    tracks = build_tracks(norm_matches)
    tracks_by_image: dict[int, list[int]] = {}
    for t, track in enumerate(tracks):
        for cam, _ in track.observations:
            tracks_by_image.setdefault(cam, []).append(t)

    poses = {img: priors[img] for img in range(graph.n)}
    registered: list[int] = []
    reg_set: set[int] = set()
    point_of_track: dict[int, np.ndarray] = {}
    stage_rmse: list[tuple[str, float]] = []

    def current_cameras():
        return [Camera(poses[img], intrinsics[img]) for img in registered]

    def build_scene() -> tuple[Scene, list[int]]:
        slot = {img: s for s, img in enumerate(registered)}
        active = sorted(t for t in point_of_track)
        pts = np.array([point_of_track[t] for t in active]).reshape(-1, 3)
        ci, pi, px = [], [], []
        for row, t in enumerate(active):
            for cam, pix in tracks[t].observations:
                if cam in slot:
                    ci.append(slot[cam])
                    pi.append(row)
                    px.append(pix)
        scene = Scene(current_cameras(), pts, np.array(ci, dtype=int),
                      np.array(pi, dtype=int), np.array(px, dtype=float))
        return scene, active

    def write_back(scene: Scene, active: list[int]):
        for s, img in enumerate(registered):
            poses[img] = scene.cameras[s].pose
        for row, t in enumerate(active):
            point_of_track[t] = scene.points[row]

    def try_triangulate(img: int):
        for t in tracks_by_image.get(img, []):
            if t in point_of_track:
                continue
            active_obs = tuple((c, p) for c, p in tracks[t].observations if c in reg_set)
            if len(active_obs) < 2:
                continue
            try:
                point_of_track[t] = triangulate(Track(active_obs), [Camera(poses[c], intrinsics[c])
                                                                    if c in reg_set else None
                                                                    for c in range(graph.n)])
            except (TriangulationError, BehindCameraError):
                continue

    def run_ba(label: str, fixed: frozenset[int]):
        scene, active = build_scene()
        if len(scene.cameras) < 2 or scene.num_observations < 6 or len(active) == 0:
            return None
        counts = np.bincount(scene.point_indices, minlength=len(scene.points))
        keep = counts >= 2
        if not np.all(keep):
            rows = np.array([k for k in range(scene.num_observations) if keep[scene.point_indices[k]]], dtype=int)
            remap = -np.ones(len(scene.points), dtype=int)
            remap[keep] = np.arange(keep.sum())
            scene = Scene(scene.cameras, scene.points[keep], scene.camera_indices[rows],
                          remap[scene.point_indices[rows]], scene.pixels[rows])
            active = [t for t, k in zip(active, keep) if k]
        adjusted, rep = bundle_adjust(scene, replace(opts, fixed_cameras=fixed, fixed_points=frozenset()))
        write_back(adjusted, active)
        stage_rmse.append((label, rep.final_rmse))
        return rep

    def register(img: int):
        registered.append(img)
        reg_set.add(img)
        try_triangulate(img)

    register(seed[0])
    register(seed[1])
    queue = [seed[0], seed[1]]
    since_ba = 2
    report = None
    while queue:
        head = queue.pop(0)
        for nxt in usable.neighbors(head):
            if nxt in reg_set:
                continue
            register(nxt)
            queue.append(nxt)
            since_ba += 1
            if since_ba >= opts.local_batch:
                fixed = frozenset(range(len(registered) - opts.local_batch)) or frozenset()
                run_ba(f"local@{len(registered)}", fixed)
                since_ba = 0
    report = run_ba("global", frozenset())
    scene, active = build_scene()
    unregistered = sorted(set(range(graph.n)) - reg_set)
    return ReconstructionResult(scene, list(registered), unregistered, stage_rmse, report)
