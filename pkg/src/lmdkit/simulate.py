"""Synthetic change injection by ray tracing virtual objects.

A change region is dropped at a random spot in a map's dominant-
direction frame and filled with a few small axis-aligned boxes; every
beam of the map is re-traced against them, so beams that hit a box are
shortened exactly as a real newly appeared object would shorten them.
The modified endpoints are the exported ground truth.
"""

from dataclasses import dataclass

import numpy as np

from lmdkit import kernels
from lmdkit.ingest import LocalMap
from lmdkit.planner import SceneFrame, axis_align_map, estimate_dominant_orientation, rotate_points

REGION_SIDE = (1.0, 2.0)
OBJECT_SIDE = (0.2, 0.6)
MAX_OBJECTS = 5
MAX_ATTEMPTS = 100


@dataclass
class ChangeRegion:
    """Placement of the injected change, in the scene frame."""

    center: np.ndarray  # (2,)
    w: float
    h: float
    theta: float  # scene-frame angle the rects are aligned to

    @property
    def rect(self):
        return (
            float(self.center[0] - self.w / 2),
            float(self.center[1] - self.h / 2),
            float(self.center[0] + self.w / 2),
            float(self.center[1] + self.h / 2),
        )


@dataclass
class VirtualObject:
    rect: tuple  # (xmin, ymin, xmax, ymax) in the scene frame


@dataclass
class SimulatedChange:
    modified_map: LocalMap
    region: ChangeRegion
    objects: list
    ground_truth: np.ndarray  # (k, 2) modified endpoints, map frame
    modified_indices: np.ndarray  # (k,) rows of the map's point array


def ray_trace(pose, rng_range, bearing, objects):
    """Shortened range of one beam against the object set.

    ``bearing`` is the absolute direction of the beam in the frame the
    objects live in. Objects at or beyond the original endpoint leave
    the reading unchanged.
    """
    ox = np.array([float(pose[0])])
    oy = np.array([float(pose[1])])
    ex = ox + rng_range * np.cos(bearing)
    ey = oy + rng_range * np.sin(bearing)
    rects = np.array([o.rect for o in objects], dtype=np.float64).reshape(-1, 4)
    t = kernels.raytrace_rects(ox, oy, ex, ey, rects)[0]
    return float(rng_range * t) if np.isfinite(t) else float(rng_range)


def _sample_objects(rng, region):
    x0, y0, x1, y1 = region.rect
    count = int(rng.integers(1, MAX_OBJECTS + 1))
    objects = []
    for _ in range(count):
        sw, sh = rng.uniform(OBJECT_SIDE[0], OBJECT_SIDE[1], size=2)
        ox = rng.uniform(x0, x1 - sw)
        oy = rng.uniform(y0, y1 - sh)
        objects.append(VirtualObject(rect=(float(ox), float(oy), float(ox + sw), float(oy + sh))))
    return objects


def inject_change(local_map, seed):
    """Inject an observable synthetic change into a local map.

    Region size and placement, object count, and object shapes are all
    drawn from the seeded generator; placements that no beam notices
    are resampled, up to MAX_ATTEMPTS. Unmodified beams keep their
    exact original endpoints.
    """
    if len(local_map.trajectory) < 1:
        raise ValueError("map has no scan poses")
    try:
        frame = estimate_dominant_orientation(local_map.points)
    except ValueError:
        frame = SceneFrame(theta=0.0)
    aligned = axis_align_map(local_map, frame)
    allxy = np.concatenate([aligned.points, aligned.trajectory[:, :2]])
    lo = allxy.min(axis=0)
    hi = allxy.max(axis=0)
    src = aligned.trajectory[local_map.point_pose_index, :2]
    ox = np.ascontiguousarray(src[:, 0])
    oy = np.ascontiguousarray(src[:, 1])
    ex = np.ascontiguousarray(aligned.points[:, 0])
    ey = np.ascontiguousarray(aligned.points[:, 1])
    rng = np.random.default_rng(seed)
    for _ in range(MAX_ATTEMPTS):
        w, h = rng.uniform(REGION_SIDE[0], REGION_SIDE[1], size=2)
        center = rng.uniform(lo, hi)
        region = ChangeRegion(center=center, w=float(w), h=float(h), theta=frame.theta)
        objects = _sample_objects(rng, region)
        rects = np.array([o.rect for o in objects], dtype=np.float64)
        t = kernels.raytrace_rects(ox, oy, ex, ey, rects)
        hit = np.isfinite(t)
        if not hit.any():
            continue
        idx = np.flatnonzero(hit)
        new_aligned = np.stack(
            [ox[idx] + t[idx] * (ex[idx] - ox[idx]), oy[idx] + t[idx] * (ey[idx] - oy[idx])],
            axis=1,
        )
        new_world = rotate_points(new_aligned, frame.theta)
        points = local_map.points.copy()
        points[idx] = new_world
        modified = LocalMap(
            id=local_map.id,
            points=points,
            trajectory=local_map.trajectory.copy(),
            arc_start=local_map.arc_start,
            arc_end=local_map.arc_end,
            point_pose_index=local_map.point_pose_index.copy(),
        )
        return SimulatedChange(
            modified_map=modified,
            region=region,
            objects=objects,
            ground_truth=new_world,
            modified_indices=idx,
        )
    raise RuntimeError(f"no observable change after {MAX_ATTEMPTS} attempts")
