"""Synthetic Manhattan-world benchmark with a loop-closing trajectory.

Simulates a robot driving laps of a rectangular corridor around a block
of rooms. Structure is deliberately repetitive (periodic wall stubs,
identical rooms, one canonical clutter shape) so that word bags look
alike everywhere and only the spatial arrangement tells places apart;
clutter placement is seeded per run. Lap two revisits lap one's
positions, giving loop-closure ground truth with a large arclength gap.
"""

import numpy as np

from lmdkit import kernels
from lmdkit.ingest import ScanRecord, segment_local_maps

WORLD_W = 40.0
WORLD_H = 30.0
BLOCK = (8.0, 8.0, 32.0, 22.0)
PATH = (4.0, 4.0, 36.0, 26.0)
MAX_RANGE = 6.0
MISS_RANGE = 60.0  # reported for beams that hit nothing; beyond the valid gate
N_BEAMS = 361
STEP = 0.25
STUB_SPACING = 4.0
STUB_LEN = 2.2
STUB_JITTER = 0.5
FURNITURE_SPACING = 1.3
DOOR_WIDTH = 1.8
CLUTTER_SIDE = 0.4
N_CLUTTER = 60
PATH_CLEARANCE = 1.2


def _wall_x(y, x0, x1, gaps=()):
    """Horizontal wall segments of [x0, x1] at height y minus gap spans."""
    spans = [(x0, x1)]
    for g0, g1 in gaps:
        nxt = []
        for a, b in spans:
            if g1 <= a or g0 >= b:
                nxt.append((a, b))
            else:
                if a < g0:
                    nxt.append((a, g0))
                if g1 < b:
                    nxt.append((g1, b))
        spans = nxt
    return [(a, y, b, y) for a, b in spans if b > a]


def _wall_y(x, y0, y1, gaps=()):
    return [(x, a, x, b) for a, y, b, _ in _wall_x(0.0, y0, y1, gaps)]


def _door(center):
    return (center - DOOR_WIDTH / 2, center + DOOR_WIDTH / 2)


def world_rects(seed, aliased=False):
    """All wall and clutter rectangles of the seeded world, as (K, 4).

    The default texturing gives every stretch of corridor a unique local
    shape (jittered stubs, continuously sized furniture and clutter).
    ``aliased=True`` swaps it for a small menu of exact templates at
    fixed spacing, so word statistics repeat along the corridor and only
    the arrangement of pieces tells places apart.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x57A7]))
    rects = []
    # outer shell
    rects += _wall_x(0.0, 0.0, WORLD_W)
    rects += _wall_x(WORLD_H, 0.0, WORLD_W)
    rects += _wall_y(0.0, 0.0, WORLD_H)
    rects += _wall_y(WORLD_W, 0.0, WORLD_H)
    _add_stubs(rects, rng if not aliased else None)
    _add_block_and_rooms(rects)
    if aliased:
        _furniture_aliased(rects, rng)
    else:
        _furniture_unique(rects, rng)
    _add_clutter(rects, rng, canonical=aliased)
    out = np.array(rects, dtype=np.float64)
    # snap every face to a 0.1 m projection-bin center that also lies
    # inside a single 0.2 m interest bucket: faces then occupy one stable
    # histogram bin under axis alignment instead of straddling an edge
    out = np.floor(out / 0.2) * 0.2 + 0.05
    return out[(out[:, 2] > out[:, 0]) | (out[:, 3] > out[:, 1])]


def _add_stubs(rects, rng):
    """Wall stubs jutting into the corridor at regular spacing.

    With an rng the spacing, length, and position jitter keep any two
    sensing windows from being congruent; without one every stub is the
    same exact shape.
    """
    def jit():
        return float(rng.uniform(-STUB_JITTER, STUB_JITTER)) if rng is not None else 0.0

    for x in np.arange(STUB_SPACING, WORLD_W - 1.0, STUB_SPACING):
        rects += _wall_y(float(x) + jit(), 0.0, STUB_LEN + jit())
        rects += _wall_y(float(x) + jit(), WORLD_H - STUB_LEN + jit(), WORLD_H)
    for y in np.arange(STUB_SPACING, WORLD_H - 1.0, STUB_SPACING):
        rects += _wall_x(float(y) + jit(), 0.0, STUB_LEN + jit())
        rects += _wall_x(float(y) + jit(), WORLD_W - STUB_LEN + jit(), WORLD_W)


def _add_block_and_rooms(rects):
    """Block ring with one door per section, identical rooms inside."""
    bx0, by0, bx1, by1 = BLOCK
    section_w = (bx1 - bx0) / 4.0
    bottom_doors = [_door(bx0 + section_w * (i + 0.5)) for i in range(4)]
    rects += _wall_x(by0, bx0, bx1, bottom_doors)
    rects += _wall_x(by1, bx0, bx1, bottom_doors)
    side_doors = [_door((by0 + by1) / 2.0)]
    rects += _wall_y(bx0, by0, by1, side_doors)
    rects += _wall_y(bx1, by0, by1, side_doors)
    mid_y = (by0 + by1) / 2.0
    rects += _wall_x(mid_y, bx0, bx1, [_door(bx0 + section_w * (i + 0.5)) for i in range(4)])
    for i in range(1, 4):
        x = bx0 + section_w * i
        rects += _wall_y(float(x), by0, by1, [_door((by0 + mid_y) / 2), _door((mid_y + by1) / 2)])


def _furniture_unique(rects, rng):
    """Seeded furniture boxes along every wall: cabinets and desks at
    varied depth give each stretch of wall a locally distinct shape,
    the way furnishings texture real building interiors."""
    for x0, y0, x1, y1 in list(rects):
        horizontal = y0 == y1
        length = (x1 - x0) if horizontal else (y1 - y0)
        s = FURNITURE_SPACING * float(rng.uniform(0.5, 1.5))
        while s < length:
            # one box on each side of the wall: whichever side faces the
            # corridor gets texture even when the other side is unseen
            for side in (1.0, -1.0):
                w = float(rng.uniform(0.4, 1.2))
                d = side * float(rng.uniform(0.3, 0.9))
                c = s + float(rng.uniform(-0.3, 0.3))
                _append_box(rects, (x0, y0, x1, y1), horizontal, c, w, d)
            s += FURNITURE_SPACING * float(rng.uniform(0.5, 1.5))


FURNITURE_TEMPLATES = ((0.6, 0.4), (1.0, 0.6), (0.4, 0.8))
ALIASED_SLOT_SPACING = 1.5


def _furniture_aliased(rects, rng):
    """Furniture slots at exact spacing along every wall; each slot
    draws from the same small template menu (one index leaves the slot
    empty), so any two wall stretches share shape inventory but not
    sequence."""
    for x0, y0, x1, y1 in list(rects):
        horizontal = y0 == y1
        length = (x1 - x0) if horizontal else (y1 - y0)
        s = ALIASED_SLOT_SPACING
        while s < length:
            for side in (1.0, -1.0):
                t = int(rng.integers(0, len(FURNITURE_TEMPLATES) + 1))
                if t < len(FURNITURE_TEMPLATES):
                    w, depth = FURNITURE_TEMPLATES[t]
                    _append_box(rects, (x0, y0, x1, y1), horizontal, s, w, side * depth)
            s += ALIASED_SLOT_SPACING


def _append_box(rects, wall, horizontal, c, w, d):
    """Box of width w at arclength c on the given side of a wall,
    clipped to the wall's extent."""
    x0, y0, x1, y1 = wall
    if horizontal:
        lo, hi = max(x0 + c - w / 2, x0), min(x0 + c + w / 2, x1)
        if hi > lo:
            rects.append((lo, min(y0, y0 + d), hi, max(y0, y0 + d)))
    else:
        lo, hi = max(y0 + c - w / 2, y0), min(y0 + c + w / 2, y1)
        if hi > lo:
            rects.append((min(x0, x0 + d), lo, max(x0, x0 + d), hi))


def _add_clutter(rects, rng, canonical=False):
    """Clutter boxes at seeded positions off the driving line; canonical
    clutter is one exact shape, otherwise sizes vary per box."""
    placed = 0
    while placed < N_CLUTTER:
        cx = rng.uniform(1.0, WORLD_W - 1.0)
        cy = rng.uniform(1.0, WORLD_H - 1.0)
        if canonical:
            hx = hy = CLUTTER_SIDE / 2.0
            if _near_path(cx, cy):
                continue
        else:
            hx, hy = rng.uniform(0.5, 2.2, size=2) * (CLUTTER_SIDE / 2.0)
            if _near_path(cx, cy):
                continue
        rects.append((cx - hx, cy - hy, cx + hx, cy + hy))
        placed += 1
    assert placed == N_CLUTTER


def _near_path(cx, cy):
    px0, py0, px1, py1 = PATH
    d = min(
        _seg_dist(cx, cy, px0, py0, px1, py0),
        _seg_dist(cx, cy, px1, py0, px1, py1),
        _seg_dist(cx, cy, px0, py1, px1, py1),
        _seg_dist(cx, cy, px0, py0, px0, py1),
    )
    return d < PATH_CLEARANCE


def _seg_dist(cx, cy, x0, y0, x1, y1):
    vx = x1 - x0
    vy = y1 - y0
    t = ((cx - x0) * vx + (cy - y0) * vy) / (vx * vx + vy * vy)
    t = min(max(t, 0.0), 1.0)
    return float(np.hypot(cx - (x0 + t * vx), cy - (y0 + t * vy)))


def loop_poses(laps=2, step=STEP, lane_shift=0.0):
    """Poses along the corridor loop, heading in the driving direction.

    ``lane_shift`` insets each successive lap's driving rectangle, so a
    revisit observes the same walls from a laterally displaced
    standpoint the way real repeat traversals do.
    """
    poses = []
    for lap in range(laps):
        inset = lane_shift * lap
        px0, py0, px1, py1 = PATH
        corners = [
            (px0 + inset, py0 + inset),
            (px1 - inset, py0 + inset),
            (px1 - inset, py1 - inset),
            (px0 + inset, py1 - inset),
        ]
        for i in range(4):
            ax, ay = corners[i]
            bx, by = corners[(i + 1) % 4]
            length = abs(bx - ax) + abs(by - ay)
            heading = np.arctan2(by - ay, bx - ax)
            n = int(round(length / step))
            for j in range(n):
                t = j / n
                poses.append((ax + t * (bx - ax), ay + t * (by - ay), heading))
    return np.array(poses, dtype=np.float64)


def simulate_scan(pose, rects, rng, noise, n_beams=N_BEAMS, max_range=MAX_RANGE):
    """One simulated scan: ray cast a 180 degree fan against the world."""
    bearings = pose[2] + np.linspace(-np.pi / 2, np.pi / 2, n_beams)
    ox = np.full(n_beams, pose[0])
    oy = np.full(n_beams, pose[1])
    ex = ox + max_range * np.cos(bearings)
    ey = oy + max_range * np.sin(bearings)
    t = kernels.raytrace_rects(ox, oy, ex, ey, rects)
    ranges = np.where(np.isfinite(t), t * max_range, MISS_RANGE)
    hit = np.isfinite(t)
    if noise > 0:
        ranges = np.where(hit, np.maximum(ranges + rng.normal(0.0, noise, n_beams), 0.06), ranges)
    return ranges


def synthetic_scans(seed, laps=2, step=STEP, noise=0.01, lane_shift=0.0, aliased=False):
    """Scan log of a seeded multi-lap drive through the world."""
    rects = world_rects(seed, aliased)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5CA9]))
    poses = loop_poses(laps, step, lane_shift)
    scans = []
    for k, pose in enumerate(poses):
        ranges = simulate_scan(pose, rects, rng, noise)
        scans.append(
            ScanRecord(
                pose=pose.copy(),
                ranges=ranges,
                angle_min=-np.pi / 2,
                angle_increment=np.pi / (N_BEAMS - 1),
                timestamp=float(k) * 0.1,
            )
        )
    return scans


def synthetic_maps(
    seed, laps=2, window=5.0, stride=1.0, step=STEP, noise=0.01, lane_shift=0.0, aliased=False
):
    """Local maps of the seeded benchmark drive."""
    scans = synthetic_scans(seed, laps, step, noise, lane_shift, aliased)
    return segment_local_maps(scans, window, stride, dataset=f"synth{seed}")
