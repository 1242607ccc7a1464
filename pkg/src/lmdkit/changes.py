"""Change detection between an aligned query/database map pair.

Query features are first cleaned with a density-ratio outlier filter,
then scored by the nearest-neighbor distance ratio of their 60-bit
change words against the database within a spatial window. Features
scoring above threshold form the pair's change mask; masks are ranked
by the pair's retrieval score.
"""

from dataclasses import dataclass

import numpy as np

from lmdkit import kernels


@dataclass(frozen=True)
class DetectorConfig:
    k_lof: int = 10  # outlier-filter neighborhood size
    t_lof: float = 1.6
    t_nnd: float = 1.5
    window_half: float = 3.0  # search box half-width (m)


@dataclass
class AnomalyScore:
    feature: int
    lof: float
    nnd: float
    is_outlier: bool
    is_change: bool


@dataclass
class ChangeMask:
    query_id: tuple
    db_id: tuple
    points: np.ndarray  # (k, 2) flagged positions, viewpoint-relative (m)
    scores: np.ndarray  # (k,) their distance-ratio values, descending
    rank_score: float  # the pair's pyramid match score

    def __len__(self):
        return len(self.points)


def lof_scores(points, k_lof):
    """Density-ratio outlier score of every point (higher = more isolated).

    Needs at least k_lof + 1 points so each one has a full neighborhood.
    """
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) <= k_lof:
        raise ValueError(f"need more than {k_lof} points")
    return kernels.lof_scores(
        np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]), k_lof
    )


def filter_outliers(query, cfg=DetectorConfig()):
    """Indices of query features that survive the outlier filter.

    Maps too small for the filter keep everything.
    """
    n = len(query)
    if n <= cfg.k_lof:
        return np.arange(n)
    scores = lof_scores(query.positions, cfg.k_lof)
    return np.flatnonzero(scores <= cfg.t_lof)


def _corrected_db_positions(db, offset):
    """Database positions shifted onto the query frame by the word offset."""
    return db.positions + np.asarray(offset, dtype=np.float64) * db.q


def nn_d_scores_all(query, db, offset=(0, 0), cfg=DetectorConfig()):
    """Distance-ratio score r of every query feature against the database.

    r = (Hamming distance of the feature's change word to its best
    windowed database match) / (that match's own min Hamming distance to
    its windowed database neighbors). No candidate in the window -> inf.
    """
    dbpos = _corrected_db_positions(db, offset)
    return kernels.nn_d_scores(
        np.ascontiguousarray(query.positions[:, 0]),
        np.ascontiguousarray(query.positions[:, 1]),
        np.ascontiguousarray(query.change_words),
        np.ascontiguousarray(dbpos[:, 0]),
        np.ascontiguousarray(dbpos[:, 1]),
        np.ascontiguousarray(db.change_words),
        cfg.window_half,
    )


def nn_d_score(query, feature, db, offset=(0, 0), cfg=DetectorConfig()):
    """Distance-ratio score of one query feature."""
    dbpos = _corrected_db_positions(db, offset)
    return float(
        kernels.nn_d_scores(
            query.positions[feature : feature + 1, 0].copy(),
            query.positions[feature : feature + 1, 1].copy(),
            query.change_words[feature : feature + 1].copy(),
            np.ascontiguousarray(dbpos[:, 0]),
            np.ascontiguousarray(dbpos[:, 1]),
            np.ascontiguousarray(db.change_words),
            cfg.window_half,
        )[0]
    )


def anomaly_scores(query, db, offset=(0, 0), cfg=DetectorConfig()):
    """Per-feature outlier and change scoring, for inspection and tests."""
    n = len(query)
    survivors = set(filter_outliers(query, cfg).tolist())
    if n > cfg.k_lof:
        lof = lof_scores(query.positions, cfg.k_lof)
    else:
        lof = np.ones(n)
    nnd = nn_d_scores_all(query, db, offset, cfg)
    out = []
    for f in range(n):
        survived = f in survivors
        out.append(
            AnomalyScore(
                feature=f,
                lof=float(lof[f]),
                nnd=float(nnd[f]),
                is_outlier=not survived,
                is_change=survived and nnd[f] > cfg.t_nnd,
            )
        )
    return out


def detect_changes(query, db, k_pair, cfg=DetectorConfig(), offset=(0, 0)):
    """Change mask of an aligned query/database pair.

    The query must already carry the winning orientation; ``offset`` is
    the pose-word mode from the retrieval stage. Flagged points are the
    surviving features with distance ratio above t_nnd, ordered by
    descending ratio (ties by feature index).
    """
    survivors = filter_outliers(query, cfg)
    nnd = nn_d_scores_all(query, db, offset, cfg)
    return mask_from_scores(query, db, survivors, nnd, k_pair, cfg.t_nnd)


def mask_from_scores(query, db, survivors, nnd, k_pair, t_nnd):
    """Change mask from precomputed survivor indices and ratio scores.

    Lets callers score a pair once and threshold it many times.
    """
    flagged = survivors[nnd[survivors] > t_nnd]
    order = np.lexsort((flagged, -nnd[flagged]))
    flagged = flagged[order]
    return ChangeMask(
        query_id=query.map_id,
        db_id=db.map_id,
        points=query.positions[flagged].copy(),
        scores=nnd[flagged].copy(),
        rank_score=float(k_pair),
    )


def rank_change_masks(masks):
    """Masks sorted by pair score descending; empty masks are dropped.

    Ties break by database map id ascending.
    """
    kept = [m for m in masks if len(m) > 0]
    kept.sort(key=lambda m: (-m.rank_score, m.db_id))
    return kept
