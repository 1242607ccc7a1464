"""Robot log ingestion: parse CARMEN logs, cut local maps, rasterize grids.

A local map is the pointset sensed over a fixed trajectory arclength
window (default 5 m), cut every stride (default 1 m). Grids label cells
occupied / unoccupied / unknown at 0.1 m for the planning stages.
"""

from dataclasses import dataclass, field

import numpy as np

from lmdkit import kernels

# range gates: SICK-style saturation and self-hit readings are dropped
MAX_VALID_RANGE = 50.0
MIN_VALID_RANGE = 0.05

UNKNOWN = 0
FREE = 1
OCCUPIED = 2


@dataclass
class ScanRecord:
    """One laser scan: world pose, ranges, and beam geometry."""

    pose: np.ndarray  # (x, y, heading)
    ranges: np.ndarray
    angle_min: float  # first-beam bearing relative to the heading
    angle_increment: float
    timestamp: float

    def bearings(self):
        """Absolute world bearing of every beam."""
        n = self.ranges.size
        return self.pose[2] + self.angle_min + self.angle_increment * np.arange(n)

    def valid(self):
        return (self.ranges > MIN_VALID_RANGE) & (self.ranges < MAX_VALID_RANGE)


@dataclass
class LocalMap:
    """Pointset sensed over one trajectory window.

    ``points`` are beam endpoints; ``point_pose_index`` maps every point
    to the trajectory row whose scan produced it, which keeps the beam
    geometry recoverable for rasterization and simulation.
    """

    id: tuple
    points: np.ndarray  # (n, 2)
    trajectory: np.ndarray  # (m, 3) of x, y, heading
    arc_start: float
    arc_end: float
    point_pose_index: np.ndarray = field(default=None)  # (n,) int64

    def __post_init__(self):
        if self.point_pose_index is None:
            self.point_pose_index = np.zeros(len(self.points), dtype=np.int64)


@dataclass
class OccupancyGrid:
    """Labeled grid; cell (ix, iy) covers origin + [ix, ix+1) * resolution."""

    resolution: float
    origin: np.ndarray  # (2,) world coordinate of cell (0, 0)
    labels: np.ndarray  # (h, w) uint8 of UNKNOWN / FREE / OCCUPIED
    counts: np.ndarray  # (h, w) int64 endpoint hits

    def cell_of(self, points):
        """Integer cell indices (n, 2) of world points."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return np.floor((pts - self.origin) / self.resolution).astype(np.int64)

    def centers_of(self, cells):
        """World coordinates of cell centers."""
        return self.origin + (np.asarray(cells, dtype=np.float64) + 0.5) * self.resolution


def parse_carmen_log(stream):
    """Parse FLASER lines from a CARMEN log into ScanRecords.

    ``stream`` is an iterable of lines (an open file works); a plain
    string is split on newlines. Non-laser lines are skipped. A FLASER
    line carries `FLASER n r1..rn x y theta ox oy otheta t host lt`;
    the scan pose is the corrected (x, y, theta) triple. The beam fan is
    the standard 180 degree SICK layout, first beam at heading - pi/2.
    """
    if isinstance(stream, str):
        stream = stream.splitlines()
    records = []
    for lineno, line in enumerate(stream, start=1):
        tokens = line.split()
        if not tokens or tokens[0] != "FLASER":
            continue
        try:
            n = int(tokens[1])
        except (ValueError, IndexError):
            raise ValueError(f"line {lineno}: unreadable FLASER beam count")
        if n < 1 or len(tokens) != 2 + n + 9:
            raise ValueError(
                f"line {lineno}: FLASER expects {2 + max(n, 1) + 9} fields, got {len(tokens)}"
            )
        try:
            values = np.array([float(t) for t in tokens[2 : 2 + n + 7]], dtype=np.float64)
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric FLASER field")
        ranges = values[:n]
        if (ranges < 0).any():
            raise ValueError(f"line {lineno}: negative range reading")
        x, y, theta = values[n : n + 3]
        timestamp = values[n + 6]
        increment = np.pi / (n - 1) if n > 1 else 0.0
        records.append(
            ScanRecord(
                pose=np.array([x, y, theta]),
                ranges=ranges,
                angle_min=-np.pi / 2.0,
                angle_increment=increment,
                timestamp=float(timestamp),
            )
        )
    return records


def scan_endpoints(scan):
    """World endpoints of the valid beams of one scan, plus their mask."""
    valid = scan.valid()
    bearings = scan.bearings()[valid]
    r = scan.ranges[valid]
    pts = np.stack(
        [scan.pose[0] + r * np.cos(bearings), scan.pose[1] + r * np.sin(bearings)], axis=1
    )
    return pts, valid


def segment_local_maps(scans, window_m=5.0, stride_m=1.0, dataset="default"):
    """Cut overlapping local maps from a scan sequence.

    Windows start at arclengths 0, stride, 2*stride, ... and span
    ``window_m`` of trajectory; a window that would run past the end of
    the trajectory is discarded. Scans on a window boundary belong to
    both neighbors.
    """
    if window_m <= 0 or stride_m <= 0:
        raise ValueError("window and stride must be positive")
    if not scans:
        return []
    positions = np.array([s.pose[:2] for s in scans])
    steps = np.linalg.norm(np.diff(positions, axis=0), axis=1) if len(scans) > 1 else np.array([])
    arclen = np.concatenate(([0.0], np.cumsum(steps)))
    total = arclen[-1]
    maps = []
    index = 0
    start = 0.0
    while start + window_m <= total:
        inside = np.flatnonzero((arclen >= start) & (arclen <= start + window_m))
        pts = []
        pose_idx = []
        for row, si in enumerate(inside):
            p, _ = scan_endpoints(scans[si])
            pts.append(p)
            pose_idx.append(np.full(len(p), row, dtype=np.int64))
        points = np.concatenate(pts) if pts else np.empty((0, 2))
        trajectory = np.array([scans[si].pose for si in inside])
        maps.append(
            LocalMap(
                id=(dataset, index),
                points=points,
                trajectory=trajectory,
                arc_start=start,
                arc_end=start + window_m,
                point_pose_index=np.concatenate(pose_idx) if pose_idx else None,
            )
        )
        index += 1
        start = index * stride_m
    return maps


def rasterize_occupancy(local_map, resolution=0.1):
    """Rasterize a local map into a labeled occupancy grid.

    Cells crossed by any pose-to-endpoint beam are unoccupied, endpoint
    cells are occupied (endpoint evidence wins), the rest unknown. The
    grid covers the bounding box of points and poses padded one cell,
    with the origin snapped down to the resolution lattice so that two
    maps of the same place quantize points into identical cell centers.
    """
    if len(local_map.points) == 0:
        raise ValueError("cannot rasterize an empty map")
    pts = local_map.points
    poses = local_map.trajectory[:, :2]
    allxy = np.concatenate([pts, poses])
    origin = resolution * np.floor(allxy.min(axis=0) / resolution) - resolution
    span = np.floor((allxy.max(axis=0) - origin) / resolution).astype(np.int64)
    width = int(span[0]) + 2
    height = int(span[1]) + 2
    pcell = np.floor((pts - origin) / resolution).astype(np.int64)
    ocell = np.floor((poses - origin) / resolution).astype(np.int64)
    src = ocell[local_map.point_pose_index]
    crossed = kernels.traverse_beams(
        src[:, 0].copy(), src[:, 1].copy(), pcell[:, 0].copy(), pcell[:, 1].copy(), width, height
    )
    counts = np.zeros((height, width), dtype=np.int64)
    np.add.at(counts, (pcell[:, 1], pcell[:, 0]), 1)
    labels = np.where(crossed == 1, FREE, UNKNOWN).astype(np.uint8)
    labels[counts >= 1] = OCCUPIED
    return OccupancyGrid(resolution=resolution, origin=origin, labels=labels, counts=counts)
