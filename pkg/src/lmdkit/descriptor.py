"""Appearance + pose word descriptors for local maps.

Each interest point gets a shell-sector occupancy histogram compressed
to a B-bit word by sign-binarized random projection, a pose word pair
from its quantized viewpoint-relative position, and a 60-bit change
word used by the change detector. A map's descriptor is the set of
word triples plus the raw relative feature positions.

Sector histograms are computed and stored at a finer sector count
(lcm of A and 4) so a quarter-turn of the map is an exact cyclic shift
of the stored bins; the A-sector descriptor is the block sum of the
fine bins, which equals direct A-sector binning.
"""

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from lmdkit import kernels
from lmdkit.ingest import OCCUPIED, rasterize_occupancy
from lmdkit.planner import PLANNING_RESOLUTION, Viewpoint, axis_align_map, rotate_points

FINE_RESOLUTION = 0.01
INTEREST_BUCKET = 0.2
DEFAULT_POSE_QUANTUM = 0.25

# the eight retrieval descriptor shapes, id 1..8 as (R, A), all with S=10
RETRIEVAL_VARIANTS = ((1, 1), (6, 3), (12, 6), (1, 6), (3, 6), (6, 6), (3, 1), (6, 1))


@dataclass(frozen=True)
class DescriptorConfig:
    R: float  # interest-region radius (m)
    A: int  # sector count
    S: int  # shell count
    fine_resolution: float = FINE_RESOLUTION
    B: int = 10  # word bit length
    seed: int = 0  # projection seed

    @property
    def D(self):
        return self.S * self.A

    @property
    def fine_sectors(self):
        """Internal sector count; a quarter turn is an exact bin shift."""
        return math.lcm(self.A, 4)

    @property
    def shell_radii(self):
        return tuple((i / self.S) * self.R for i in range(1, self.S + 1))


def retrieval_config(config_id, seed=0):
    """One of the eight standard retrieval descriptor shapes (1-based id)."""
    if not 1 <= config_id <= len(RETRIEVAL_VARIANTS):
        raise ValueError(f"descriptor config id must be 1..{len(RETRIEVAL_VARIANTS)}")
    r, a = RETRIEVAL_VARIANTS[config_id - 1]
    return DescriptorConfig(R=float(r), A=a, S=10, seed=seed)


def change_config(seed=0):
    """The 60-dim change-word shape: 6 shells, 10 sectors, 2 m radius.

    A tight radius keeps each word local to its feature, so a word only
    flips when geometry near that feature moves. Shells stay wider than
    the worst-case residual of pose-word offset correction, which keeps
    stationary features in the same bins across revisits.
    """
    return DescriptorConfig(R=2.0, A=10, S=6, seed=seed)


@dataclass
class AppearanceDescriptor:
    values: np.ndarray  # (D,) occupied fine-cell counts per shell-sector bin


class WordTriple(NamedTuple):
    w_a: int
    w_x: int
    w_y: int


@dataclass
class ProjectionMatrix:
    entries: np.ndarray  # (B, D)


def projection_matrix(cfg):
    """The deterministic B x D standard-normal projection for a config."""
    rng = np.random.default_rng(cfg.seed)
    return ProjectionMatrix(entries=rng.standard_normal((cfg.B, cfg.D)))


def select_interest_points(local_map, grid):
    """Occupied-cell centers thinned to one per 0.2 m bucket.

    Buckets are anchored to the absolute coordinate lattice so that two
    maps of the same place thin to the same representatives no matter
    where their grid corners fall; within a bucket the occupied cell
    with the lowest row-major index wins. Returned in the grid's frame,
    row-major order.
    """
    iy, ix = np.nonzero(grid.labels == OCCUPIED)
    if ix.size == 0:
        return np.empty((0, 2))
    centers = grid.centers_of(np.stack([ix, iy], axis=1))
    bx = np.floor(centers[:, 0] / INTEREST_BUCKET).astype(np.int64)
    by = np.floor(centers[:, 1] / INTEREST_BUCKET).astype(np.int64)
    keys = by * np.int64(1 << 32) + bx
    _, first = np.unique(keys, return_index=True)
    keep = np.sort(first)
    return centers[keep]


def fine_sector_bins(points, centers, cfg):
    """Raw (n_centers, S * fine_sectors) shell/fine-sector histograms."""
    pts = np.asarray(points, dtype=np.float64)
    ctr = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    return kernels.shell_sector_bins(
        np.ascontiguousarray(pts[:, 0]),
        np.ascontiguousarray(pts[:, 1]),
        np.ascontiguousarray(ctr[:, 0]),
        np.ascontiguousarray(ctr[:, 1]),
        float(cfg.R),
        cfg.S,
        cfg.fine_sectors,
        cfg.fine_resolution,
    )


def aggregate_fine_bins(fine, cfg):
    """Block-sum fine sectors down to the A-sector descriptor values."""
    n = fine.shape[0]
    m = cfg.fine_sectors // cfg.A
    blocks = fine.reshape(n, cfg.S, cfg.A, m)
    return blocks.sum(axis=3).reshape(n, cfg.D).astype(np.float64)


def compute_appearance_descriptor(center, points, cfg, frame=None):
    """Shell-sector histogram of the occupied 0.01 m cells around a point.

    ``points`` may be a LocalMap or an (n, 2) array; ``center`` and the
    points are rotated into ``frame`` first when one is given. Shells
    are half-open, so a point exactly on r_i falls in shell i; anything
    at or beyond R is excluded.
    """
    pts = points.points if hasattr(points, "points") else np.asarray(points, dtype=np.float64)
    ctr = np.asarray(center, dtype=np.float64).reshape(1, 2)
    if frame is not None:
        pts = rotate_points(pts, -frame.theta)
        ctr = rotate_points(ctr, -frame.theta)
    fine = fine_sector_bins(pts, ctr, cfg)
    return AppearanceDescriptor(values=aggregate_fine_bins(fine, cfg)[0])


def project_words(values, projection):
    """Sign-binarized projection of descriptor rows to B-bit words."""
    p = projection.entries if isinstance(projection, ProjectionMatrix) else projection
    vals = np.atleast_2d(values)
    if vals.shape[1] != p.shape[1]:
        raise ValueError(f"descriptor dim {vals.shape[1]} != projection dim {p.shape[1]}")
    bits = (vals @ p.T) > 0.0
    weights = np.int64(1) << np.arange(p.shape[0], dtype=np.int64)
    return (bits.astype(np.int64) @ weights).astype(np.uint16)


def project_to_word(d, projection):
    """B-bit appearance word of one descriptor (bit k set iff row k of P.d > 0)."""
    vals = d.values if isinstance(d, AppearanceDescriptor) else np.asarray(d)
    return int(project_words(vals.reshape(1, -1), projection)[0])


def quantize_pose(p, vp, q=DEFAULT_POSE_QUANTUM):
    """Pose words: floor of the viewpoint-frame coordinates over ``q``.

    ``p`` is in the same frame the map was in before axis alignment; it
    is rotated by -theta and translated by -position first.
    """
    if q <= 0:
        raise ValueError("pose quantum must be positive")
    rel = rotate_points(np.asarray(p, dtype=np.float64).reshape(1, 2), -vp.frame.theta)[0]
    rel = rel - vp.position
    return int(np.floor(rel[0] / q)), int(np.floor(rel[1] / q))


def quantize_relative(rel, q):
    """Pose words for already viewpoint-relative positions, row-wise."""
    return np.floor(np.asarray(rel, dtype=np.float64) / q).astype(np.int32)


def change_words_from_values(values):
    """Binarize 60-dim rows against their own mean and pack to uint64.

    Strictly-greater comparison: a constant row packs to word 0.
    """
    vals = np.atleast_2d(values)
    bits = vals > vals.mean(axis=1, keepdims=True)
    shifts = np.arange(vals.shape[1], dtype=np.uint64)
    return np.bitwise_or.reduce(bits.astype(np.uint64) << shifts, axis=1)


@dataclass
class LocalMapDescriptor:
    """Word-triple set of one local map plus change-detection payload.

    ``positions`` are raw viewpoint-relative feature coordinates in the
    scene frame; ``fine_bins`` / ``change_fine_bins`` hold the stored
    fine-sector histograms needed to rotate the descriptor and are
    dropped for pure database storage.
    """

    map_id: tuple
    viewpoint: Viewpoint
    words_a: np.ndarray  # (n,) uint16
    words_x: np.ndarray  # (n,) int32
    words_y: np.ndarray  # (n,) int32
    change_words: np.ndarray  # (n,) uint64
    positions: np.ndarray  # (n, 2) float64
    retrieval_cfg: DescriptorConfig
    change_cfg: DescriptorConfig
    q: float = DEFAULT_POSE_QUANTUM
    fine_bins: np.ndarray = None  # (n, S * fine_sectors) int64
    change_fine_bins: np.ndarray = None
    _pyramid_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __len__(self):
        return len(self.words_a)

    @property
    def triples(self):
        return [
            WordTriple(int(a), int(x), int(y))
            for a, x, y in zip(self.words_a, self.words_x, self.words_y)
        ]

    def strip_bins(self):
        """Copy without rotation payload, for database-side storage."""
        return replace(self, fine_bins=None, change_fine_bins=None, _pyramid_cache={})


def build_lmd(local_map, vp, cfg_retrieval, cfg_change=None, q=DEFAULT_POSE_QUANTUM, grid=None):
    """Assemble the full descriptor of one local map.

    The map is axis-aligned into the viewpoint's frame, interest points
    are selected from its 0.1 m grid, and each one yields a word triple
    under ``cfg_retrieval`` plus a 60-bit change word under
    ``cfg_change``. Pass ``grid`` to reuse an already rasterized
    aligned-frame grid.
    """
    if cfg_change is None:
        cfg_change = change_config(cfg_retrieval.seed)
    if cfg_change.D != 60:
        raise ValueError("change descriptor must have 60 dimensions")
    aligned = axis_align_map(local_map, vp.frame)
    if grid is None:
        grid = rasterize_occupancy(aligned, PLANNING_RESOLUTION)
    centers = select_interest_points(aligned, grid)
    rel = centers - vp.position
    if len(centers) == 0:
        empty = lambda dt: np.empty(0, dtype=dt)
        return LocalMapDescriptor(
            map_id=local_map.id,
            viewpoint=vp,
            words_a=empty(np.uint16),
            words_x=empty(np.int32),
            words_y=empty(np.int32),
            change_words=empty(np.uint64),
            positions=np.empty((0, 2)),
            retrieval_cfg=cfg_retrieval,
            change_cfg=cfg_change,
            q=q,
            fine_bins=np.empty((0, cfg_retrieval.S * cfg_retrieval.fine_sectors), dtype=np.int64),
            change_fine_bins=np.empty((0, cfg_change.S * cfg_change.fine_sectors), dtype=np.int64),
        )
    fine = fine_sector_bins(aligned.points, centers, cfg_retrieval)
    words_a = project_words(aggregate_fine_bins(fine, cfg_retrieval), projection_matrix(cfg_retrieval))
    pose = quantize_relative(rel, q)
    cfine = fine_sector_bins(aligned.points, centers, cfg_change)
    cwords = change_words_from_values(aggregate_fine_bins(cfine, cfg_change))
    return LocalMapDescriptor(
        map_id=local_map.id,
        viewpoint=vp,
        words_a=words_a,
        words_x=pose[:, 0].copy(),
        words_y=pose[:, 1].copy(),
        change_words=cwords,
        positions=rel,
        retrieval_cfg=cfg_retrieval,
        change_cfg=cfg_change,
        q=q,
        fine_bins=fine,
        change_fine_bins=cfine,
    )
