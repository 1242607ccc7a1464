"""Inverted-file retrieval with a spatial-pyramid match kernel.

Database descriptors are indexed by appearance word; a query is scored
against candidate maps at four quarter-turn orientation hypotheses with
the pyramid kernel K = I0/4 + I1/4 + I2/2 (at the default two-level
pyramid), where I_l is the histogram intersection of (word, cell)
occupancy at level l. A pose-word difference mode gives a translation
offset estimate per match.
"""

import bisect
from dataclasses import dataclass, replace

import numpy as np

from lmdkit import kernels
from lmdkit.descriptor import (
    aggregate_fine_bins,
    change_words_from_values,
    project_words,
    projection_matrix,
    quantize_relative,
)

_CELL_OFF = np.int64(1) << np.int64(21)
_OFS_OFF = np.int64(1) << np.int64(21)


@dataclass(frozen=True)
class PyramidConfig:
    L: int = 2  # finest level; levels run 0..L
    W: float = 5.0  # level-0 cell width (m)

    def cell_size(self, level):
        return self.W * 2.0 ** (-level)

    def weight(self, level):
        if level == 0:
            return 1.0 / 2.0**self.L
        return 1.0 / 2.0 ** (self.L - level + 1)


@dataclass
class MatchResult:
    map_id: tuple
    score: float
    orientation: int  # quarter turns applied to the query
    offset: tuple  # (dx, dy) in pose-word units


def _pyramid_keys(lmd, cfg):
    """Per-level sorted (word, cell) key arrays, cached on the descriptor."""
    tag = (cfg.L, cfg.W)
    cached = lmd._pyramid_cache.get(tag)
    if cached is not None:
        return cached
    words = lmd.words_a.astype(np.int64)
    keys = []
    for level in range(cfg.L + 1):
        size = cfg.cell_size(level)
        cx = np.floor(lmd.positions[:, 0] / size).astype(np.int64)
        cy = np.floor(lmd.positions[:, 1] / size).astype(np.int64)
        k = (words << np.int64(44)) | ((cx + _CELL_OFF) << np.int64(22)) | (cy + _CELL_OFF)
        keys.append(np.sort(k))
    lmd._pyramid_cache[tag] = keys
    return keys


def spm_similarity(x, xp, cfg=PyramidConfig()):
    """Pyramid match score between two descriptors of the same config."""
    if x.retrieval_cfg != xp.retrieval_cfg:
        raise ValueError("descriptor configs differ")
    ka = _pyramid_keys(x, cfg)
    kb = _pyramid_keys(xp, cfg)
    score = 0.0
    for level in range(cfg.L + 1):
        inter = kernels.histogram_intersection(ka[level], kb[level])
        score += cfg.weight(level) * inter
    return score


def quarter_turn(points, i):
    """Points rotated by i exact quarter turns about the origin."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    x = pts[:, 0]
    y = pts[:, 1]
    if i % 4 == 0:
        return pts.copy()
    if i % 4 == 1:
        return np.stack([-y, x], axis=1)
    if i % 4 == 2:
        return np.stack([-x, -y], axis=1)
    return np.stack([y, -x], axis=1)


def rotate_lmd(lmd, i):
    """The descriptor of the same map rotated by i quarter turns.

    Raw relative positions rotate exactly; pose words are re-quantized;
    appearance and change words are recomputed from the stored fine
    sector bins, for which a quarter turn is a cyclic shift.
    """
    if i not in (0, 1, 2, 3):
        raise ValueError("orientation must be 0..3")
    if i == 0:
        return lmd
    if lmd.fine_bins is None or lmd.change_fine_bins is None:
        raise ValueError("descriptor lacks stored sector bins; cannot rotate")
    pos = quarter_turn(lmd.positions, i)
    cfg = lmd.retrieval_cfg
    ccfg = lmd.change_cfg
    n = len(lmd)
    fine = np.roll(
        lmd.fine_bins.reshape(n, cfg.S, cfg.fine_sectors), (cfg.fine_sectors // 4) * i, axis=2
    ).reshape(n, -1)
    cfine = np.roll(
        lmd.change_fine_bins.reshape(n, ccfg.S, ccfg.fine_sectors),
        (ccfg.fine_sectors // 4) * i,
        axis=2,
    ).reshape(n, -1)
    pose = quantize_relative(pos, lmd.q)
    return replace(
        lmd,
        words_a=project_words(aggregate_fine_bins(fine, cfg), projection_matrix(cfg)),
        words_x=pose[:, 0].copy(),
        words_y=pose[:, 1].copy(),
        change_words=change_words_from_values(aggregate_fine_bins(cfine, ccfg)),
        positions=pos,
        fine_bins=fine,
        change_fine_bins=cfine,
        _pyramid_cache={},
    )


class InvertedIndex:
    """Appearance-word postings plus stored descriptors.

    Posting lists hold (map_id, feature_index) pairs sorted by map id.
    Stored descriptors are stripped of their rotation payload; only
    queries are ever rotated.
    """

    def __init__(self, retrieval_cfg, pyramid_cfg=PyramidConfig(), q=None):
        self.retrieval_cfg = retrieval_cfg
        self.pyramid_cfg = pyramid_cfg
        self.q = q
        self.postings = {}
        self.descriptors = {}

    def __len__(self):
        return len(self.descriptors)


def index_insert(index, lmd):
    """Add one map's descriptor to the index; duplicate ids are refused."""
    if lmd.retrieval_cfg != index.retrieval_cfg:
        raise ValueError("descriptor config does not match the index")
    if index.q is None:
        index.q = lmd.q
    elif lmd.q != index.q:
        raise ValueError("pose quantum does not match the index")
    if lmd.map_id in index.descriptors:
        raise ValueError(f"map {lmd.map_id!r} already indexed")
    index.descriptors[lmd.map_id] = lmd.strip_bins()
    for feat, word in enumerate(lmd.words_a):
        bisect.insort(index.postings.setdefault(int(word), []), (lmd.map_id, feat))
    return index


def estimate_offset(query, db, orientation=0):
    """Mode of the pose-word differences over shared appearance words.

    The query must already carry the hypothesized orientation (the
    ``orientation`` argument is recorded by the caller, not applied
    here). Ties pick the lexicographically smallest (dx, dy); no shared
    words gives (0, 0).
    """
    qw = query.words_a
    dw = db.words_a
    shared = np.intersect1d(qw, dw)
    if shared.size == 0:
        return (0, 0)
    diffs = []
    for w in shared:
        qi = np.flatnonzero(qw == w)
        di = np.flatnonzero(dw == w)
        dx = (query.words_x[qi, None].astype(np.int64) - db.words_x[None, di]).ravel()
        dy = (query.words_y[qi, None].astype(np.int64) - db.words_y[None, di]).ravel()
        diffs.append((dx + _OFS_OFF) * (np.int64(1) << np.int64(22)) + (dy + _OFS_OFF))
    keys, counts = np.unique(np.concatenate(diffs), return_counts=True)
    best = keys[int(np.argmax(counts))]
    dx = int(best >> np.int64(22)) - int(_OFS_OFF)
    dy = int(best & ((np.int64(1) << np.int64(22)) - np.int64(1))) - int(_OFS_OFF)
    return (dx, dy)


def score_against(rotations, db, pyramid_cfg):
    """Best (score, orientation) of a candidate over the four hypotheses."""
    best_k = -1.0
    best_i = 0
    for i, rot in enumerate(rotations):
        k = spm_similarity(rot, db, pyramid_cfg)
        if k > best_k:
            best_k = k
            best_i = i
    return best_k, best_i


def query_rotations(query):
    return [rotate_lmd(query, i) for i in range(4)]


def query_ranked(index, query, top_k=10):
    """Ranked matches of a query against the index.

    Candidates are the maps sharing at least one appearance word with
    any orientation hypothesis of the query; each is scored with the
    best of the four hypotheses. Maps scoring zero are unranked. Ties
    break by map id ascending.
    """
    rotations = query_rotations(query)
    candidates = set()
    for rot in rotations:
        for word in np.unique(rot.words_a):
            for map_id, _ in index.postings.get(int(word), ()):
                candidates.add(map_id)
    return _rank(rotations, sorted(candidates), index, top_k)


def exhaustive_ranked(index, query, top_k=10):
    """Oracle twin of query_ranked: scores every indexed map."""
    rotations = query_rotations(query)
    return _rank(rotations, sorted(index.descriptors), index, top_k)


def _rank(rotations, map_ids, index, top_k):
    results = []
    for map_id in map_ids:
        k, i = score_against(rotations, index.descriptors[map_id], index.pyramid_cfg)
        if k > 0.0:
            results.append(MatchResult(map_id=map_id, score=k, orientation=i, offset=(0, 0)))
    results.sort(key=lambda r: (-r.score, r.map_id))
    results = results[:top_k]
    for r in results:
        r.offset = estimate_offset(rotations[r.orientation], index.descriptors[r.map_id], r.orientation)
    return results
