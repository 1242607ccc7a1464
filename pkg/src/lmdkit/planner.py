"""Canonical viewpoint planning for local maps.

The planner axis-aligns a map to its dominant direction, parses the
occupancy grid into Manhattan wall runs, and anchors the map's
coordinate frame at either the wall-cell center of gravity (CoG) or the
center of the dominant room (CoR). The planned viewpoint is what makes
descriptors comparable across revisits.
"""

from dataclasses import dataclass

import numpy as np

from lmdkit import kernels
from lmdkit.ingest import FREE, OCCUPIED, LocalMap, OccupancyGrid, rasterize_occupancy

PLANNING_RESOLUTION = 0.1
ORIENTATION_BIN = 0.1
N_ROOM_SAMPLES = 5000

WALL_MIN_CELLS = 3
WALL_MAX_GAP = 1


@dataclass
class SceneFrame:
    """Dominant direction of a map, folded into [0, pi/2)."""

    theta: float


@dataclass
class WallPrimitive:
    axis: str  # "x": run along a grid row; "y": along a column
    line_coordinate: float  # center of the supporting row/column (m)
    span: tuple  # (start, end) outer cell edges along the run (m)
    cells: np.ndarray  # (k, 2) member cell indices (ix, iy)


@dataclass
class RoomSample:
    rect: tuple  # (x0, y0, x1, y1) inclusive cell bounds
    cells: np.ndarray


@dataclass
class Viewpoint:
    position: np.ndarray  # (2,) in the axis-aligned scene frame (m)
    frame: SceneFrame
    method: str  # "cog" or "cor"


def rotate_points(points, theta):
    """Rotate points by ``theta`` about the origin."""
    c = np.cos(theta)
    s = np.sin(theta)
    pts = np.asarray(points, dtype=np.float64)
    return np.stack([pts[:, 0] * c - pts[:, 1] * s, pts[:, 0] * s + pts[:, 1] * c], axis=1)


def estimate_dominant_orientation(points):
    """Grid-search the rotation that minimizes projection entropy.

    Tries integer degrees 0..89; for each, rotates the points into that
    frame and sums the Shannon entropies of the 0.1 m x- and y-projection
    histograms. Smallest entropy wins, ties to the smaller angle.
    """
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 10:
        raise ValueError("need at least 10 points to estimate an orientation")
    ent = kernels.orientation_entropies(
        np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]), ORIENTATION_BIN, 90
    )
    return SceneFrame(theta=float(np.radians(int(np.argmin(ent)))))


def axis_align_map(local_map, frame):
    """Copy of the map expressed in the scene frame (rotation by -theta)."""
    pts = rotate_points(local_map.points, -frame.theta)
    traj = local_map.trajectory.copy()
    traj[:, :2] = rotate_points(local_map.trajectory[:, :2], -frame.theta)
    traj[:, 2] = traj[:, 2] - frame.theta
    return LocalMap(
        id=local_map.id,
        points=pts,
        trajectory=traj,
        arc_start=local_map.arc_start,
        arc_end=local_map.arc_end,
        point_pose_index=local_map.point_pose_index.copy(),
    )


def _runs(indices, min_cells, max_gap):
    """Maximal index runs allowing gaps <= max_gap, kept if >= min_cells."""
    runs = []
    cur = [indices[0]]
    for v in indices[1:]:
        if v - cur[-1] <= max_gap + 1:
            cur.append(v)
        else:
            runs.append(cur)
            cur = [v]
    runs.append(cur)
    return [r for r in runs if len(r) >= min_cells]


def parse_walls(grid, frame):
    """Extract Manhattan wall runs from an axis-aligned grid.

    A wall is a maximal run of >= 3 occupied cells along one row or
    column, tolerating single-cell gaps. Occupied cells outside every
    run stay available to CoG as isolated wall cells.
    """
    occ = grid.labels == OCCUPIED
    res = grid.resolution
    walls = []
    for iy in range(occ.shape[0]):
        cols = np.flatnonzero(occ[iy])
        if cols.size == 0:
            continue
        for run in _runs(cols, WALL_MIN_CELLS, WALL_MAX_GAP):
            cells = np.array([[ix, iy] for ix in run], dtype=np.int64)
            walls.append(
                WallPrimitive(
                    axis="x",
                    line_coordinate=float(grid.origin[1] + (iy + 0.5) * res),
                    span=(
                        float(grid.origin[0] + run[0] * res),
                        float(grid.origin[0] + (run[-1] + 1) * res),
                    ),
                    cells=cells,
                )
            )
    for ix in range(occ.shape[1]):
        rows = np.flatnonzero(occ[:, ix])
        if rows.size == 0:
            continue
        for run in _runs(rows, WALL_MIN_CELLS, WALL_MAX_GAP):
            cells = np.array([[ix, iy] for iy in run], dtype=np.int64)
            walls.append(
                WallPrimitive(
                    axis="y",
                    line_coordinate=float(grid.origin[0] + (ix + 0.5) * res),
                    span=(
                        float(grid.origin[1] + run[0] * res),
                        float(grid.origin[1] + (run[-1] + 1) * res),
                    ),
                    cells=cells,
                )
            )
    return walls


def plan_viewpoint_cog(grid, frame):
    """Viewpoint at the unweighted mean of occupied-cell centers."""
    iy, ix = np.nonzero(grid.labels == OCCUPIED)
    if ix.size == 0:
        raise ValueError("no occupied cells")
    centers = grid.centers_of(np.stack([ix, iy], axis=1))
    return Viewpoint(position=centers.mean(axis=0), frame=frame, method="cog")


def dominant_room_cells(membership, free, factor=0.9, step=0.05):
    """Free cells on the peaks of both marginal room-membership histograms.

    A cell qualifies when its column total and row total both reach
    ``factor`` of the respective maxima. If no free cell qualifies the
    factor is relaxed by ``step`` until one does.
    """
    fx = membership.sum(axis=0)
    fy = membership.sum(axis=1)
    while True:
        ok = (
            free
            & (fx[None, :] >= factor * fx.max())
            & (fy[:, None] >= factor * fy.max())
        )
        if ok.any() or factor <= 0.0:
            return np.argwhere(ok)[:, ::-1]  # rows of (ix, iy)
        factor = max(factor - step, 0.0)


def sample_rooms(grid, rng, n_samples=N_ROOM_SAMPLES):
    """Seed-and-grow room rectangles; returns per-cell membership counts."""
    free = (grid.labels == FREE).astype(np.uint8)
    flat = np.flatnonzero(free.ravel())
    if flat.size == 0:
        return None
    picks = flat[rng.integers(0, flat.size, size=n_samples)]
    seed_iy, seed_ix = np.unravel_index(picks, free.shape)
    return kernels.grow_rooms(free, seed_ix.astype(np.int64), seed_iy.astype(np.int64))


def plan_viewpoint_cor(grid, frame, seed):
    """Viewpoint at the center of the dominant room.

    Grows N_ROOM_SAMPLES axis-aligned rectangles from random free seed
    cells, accumulates how often each cell is covered, and averages the
    centers of the free cells that dominate both marginal histograms.
    Falls back to CoG when the grid has no free cells.
    """
    rng = np.random.default_rng(seed)
    membership = sample_rooms(grid, rng)
    if membership is None:
        return plan_viewpoint_cog(grid, frame)
    dom = dominant_room_cells(membership, grid.labels == FREE)
    centers = grid.centers_of(dom)
    return Viewpoint(position=centers.mean(axis=0), frame=frame, method="cor")


@dataclass
class Scene:
    """Planned view of one local map: frame, aligned copy, grid, viewpoint."""

    frame: SceneFrame
    aligned_map: LocalMap
    grid: OccupancyGrid
    viewpoint: Viewpoint


def plan_scene(local_map, method="cor", seed=0, resolution=PLANNING_RESOLUTION):
    """Run the full planning chain for one map."""
    frame = estimate_dominant_orientation(local_map.points)
    aligned = axis_align_map(local_map, frame)
    grid = rasterize_occupancy(aligned, resolution)
    if method == "cor":
        vp = plan_viewpoint_cor(grid, frame, seed)
    elif method == "cog":
        vp = plan_viewpoint_cog(grid, frame)
    else:
        raise ValueError(f"unknown planner method {method!r}")
    return Scene(frame=frame, aligned_map=aligned, grid=grid, viewpoint=vp)
