"""Batch experiments: loop-closure ground truth, rank metrics, recall curves.

Ground truth pairs each query map with the geometrically closest map
that is far away along the trajectory; retrieval quality is summarized
as the averaged normalized rank (ANR, lower better) and top-X%
recognition rates; change detection quality as recall over ranked
change masks. Everything is seeded and iteration orders are fixed, so
runs with the same config produce byte-identical artifacts.
"""

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from lmdkit import kernels
from lmdkit.changes import (
    DetectorConfig,
    detect_changes,
    filter_outliers,
    mask_from_scores,
    nn_d_scores_all,
    rank_change_masks,
)
from lmdkit.descriptor import build_lmd, change_config, retrieval_config
from lmdkit.planner import plan_scene, rotate_points
from lmdkit.retrieval import (
    InvertedIndex,
    PyramidConfig,
    estimate_offset,
    index_insert,
    quarter_turn,
    query_ranked,
    query_rotations,
    rotate_lmd,
    score_against,
)
from lmdkit.simulate import inject_change

MIN_TRAJECTORY_GAP = 10.0
REVISIT_CUTOFF = 1.0
HIT_TOLERANCE = 0.5
# single clutter boxes are ~0.2-0.9 m across; injected changes observed by
# fewer points than this are below the detector's feature scale
MIN_OBSERVABLE_GT = 50


@dataclass
class GroundTruthPair:
    query_id: tuple
    db_id: tuple
    avg_nn_distance: float
    trajectory_gap: float


@dataclass
class Metrics:
    anr_per_query: float
    anr_per_dataset: float
    topx_rates: dict
    recall_curve: list
    n_tasks: int
    n_db: int


def _eligible(maps, qi, min_gap=MIN_TRAJECTORY_GAP, db=None):
    """Indices of candidate maps far enough from query qi along the path."""
    qs = maps[qi].arc_start
    pool = range(len(maps)) if db is None else db
    return [ci for ci in pool if abs(maps[ci].arc_start - qs) > min_gap]


def ground_truth_pairs(
    maps,
    min_gap=MIN_TRAJECTORY_GAP,
    revisit_cutoff=REVISIT_CUTOFF,
    db=None,
    pairing="nn",
    pose_tol=2.0,
):
    """Loop-closure relevance: nearest far-away map per query.

    For each query the candidates are maps more than ``min_gap`` away in
    trajectory arclength. With ``pairing="nn"`` the relevant one
    minimizes the mean distance from query points to their nearest
    candidate point, and queries whose best candidate is farther than
    ``revisit_cutoff`` never revisit and are skipped; candidates are
    tried nearest-centroid-first so the triangle-inequality bound prunes
    most distance evaluations. With ``pairing="pose"`` the relevant one
    is the candidate whose map centroid is nearest (within
    ``pose_tol``): position-based relevance, robust to viewpoint and
    lane changes that inflate point-to-point distances.

    When ``db`` (a list of map indices) is given, candidates are drawn
    from that subset only and the subset's members are not queried:
    the split emulates a prior mapping session queried by a later run.
    """
    trees = [cKDTree(m.points) for m in maps]
    cents = np.array([m.points.mean(axis=0) for m in maps])
    radii = np.array(
        [float(np.linalg.norm(m.points - cents[k], axis=1).max()) for k, m in enumerate(maps)]
    )
    db_set = None if db is None else set(db)
    pairs = []
    for qi, q in enumerate(maps):
        if db_set is not None and qi in db_set:
            continue
        cand = _eligible(maps, qi, min_gap, db=db)
        if not cand:
            continue
        dcc = np.linalg.norm(cents[cand] - cents[qi], axis=1)
        if pairing == "pose":
            j = int(np.argmin(dcc))
            if dcc[j] > pose_tol:
                continue
            best_ci = cand[j]
            best_avg = float(trees[best_ci].query(q.points)[0].mean())
        else:
            order = np.argsort(dcc, kind="stable")
            best_avg = np.inf
            best_ci = None
            for o in order:
                ci = cand[o]
                bound = dcc[o] - radii[qi] - radii[ci]
                if bound >= best_avg:
                    continue
                avg = float(trees[ci].query(q.points)[0].mean())
                if avg < best_avg:
                    best_avg = avg
                    best_ci = ci
            if best_ci is None or best_avg > revisit_cutoff:
                continue
        pairs.append(
            GroundTruthPair(
                query_id=q.id,
                db_id=maps[best_ci].id,
                avg_nn_distance=best_avg,
                trajectory_gap=abs(maps[best_ci].arc_start - q.arc_start),
            )
        )
    return pairs


def anr(ranks):
    """Mean normalized rank in percent; ranks are (rank, N) pairs."""
    if not ranks:
        raise ValueError("no rank observations")
    return float(np.mean([100.0 * r / n for r, n in ranks]))


def anr_per_dataset(tasks):
    """Mean over datasets of the per-dataset ANR; tasks are (dataset, rank, N)."""
    if not tasks:
        raise ValueError("no rank observations")
    groups = {}
    for dataset, rank, n in tasks:
        groups.setdefault(dataset, []).append((rank, n))
    return float(np.mean([anr(g) for _, g in sorted(groups.items())]))


def recognition_rate(ranks, x):
    """Fraction of tasks whose normalized rank is within the top x percent."""
    if not ranks:
        raise ValueError("no rank observations")
    return float(np.mean([1.0 if 100.0 * r / n <= x else 0.0 for r, n in ranks]))


def change_recall_curve(masks_per_query, gt_per_query, tol=HIT_TOLERANCE, max_rank=10):
    """Recall at mask rank k over all queries.

    ``masks_per_query`` maps query id to that query's ranked flagged
    pointsets (world frame); ``gt_per_query`` maps query id to its
    ground-truth change points. A mask hits when any flagged point is
    within ``tol`` of any ground-truth point.
    """
    qids = sorted(gt_per_query)
    hit_ranks = []
    for qid in qids:
        gt = np.asarray(gt_per_query[qid], dtype=np.float64)
        hit = 0
        for k, pts in enumerate(masks_per_query.get(qid, []), start=1):
            if k > max_rank:
                break
            if len(pts) and len(gt) and _any_within(pts, gt, tol):
                hit = k
                break
        hit_ranks.append(hit)
    curve = []
    for k in range(1, max_rank + 1):
        recall = sum(1 for h in hit_ranks if 0 < h <= k) / len(hit_ranks) if hit_ranks else 0.0
        curve.append((k, recall))
    return curve


def _any_within(pts, gt, tol):
    d = np.linalg.norm(pts[:, None, :] - gt[None, :, :], axis=2)
    return bool((d <= tol).any())


def flagged_world_points(points, viewpoint, orientation):
    """Map flagged viewpoint-relative points of a rotated query to world."""
    rel0 = quarter_turn(points, (4 - orientation) % 4)
    return rotate_points(rel0 + viewpoint.position, viewpoint.frame.theta)


def rank_of(results, relevant_id, eligible_ids):
    """1-based rank of the relevant map among eligible results.

    Maps the ranker never scored count as rank N (the worst), which
    penalizes a miss without excluding the task.
    """
    pos = 0
    for r in results:
        if r.map_id in eligible_ids:
            pos += 1
            if r.map_id == relevant_id:
                return pos
    return len(eligible_ids)


def bow_scores(rotations, db_lmd):
    """Appearance-word-only similarity: best word-bag intersection over
    the orientation hypotheses. The spatial-blind baseline."""
    dbw = np.sort(db_lmd.words_a.astype(np.int64))
    best = 0
    for rot in rotations:
        k = kernels.histogram_intersection(np.sort(rot.words_a.astype(np.int64)), dbw)
        best = max(best, int(k))
    return best


@dataclass
class BowResult:
    map_id: tuple
    score: float


def bow_ranked(index, rotations):
    """All indexed maps ranked by word-bag intersection (zeros dropped)."""
    results = []
    for map_id in sorted(index.descriptors):
        k = bow_scores(rotations, index.descriptors[map_id])
        if k > 0:
            results.append(BowResult(map_id=map_id, score=float(k)))
    results.sort(key=lambda r: (-r.score, r.map_id))
    return results


# Retrieval stress benchmark: a sparse prior-session database queried by
# the remaining windows of a later lap driven on a shifted lane through
# self-similar furniture. Small database + position-paired relevance
# makes the top-10% cut strict (about rank 2 of 22) so ranking quality,
# not word recall, decides it.
RETRIEVAL_BENCHMARK = {
    "aliased": 1,
    "lane_shift": 1.6,
    "db_stride": 8,
    "pairing": "pose",
}

DEFAULT_CONFIG = {
    "window": 5.0,
    "stride": 1.0,
    "planner": "cog",
    "descriptor_id": 6,
    "q": 0.25,
    "W": 5.0,
    "L": 2,
    "K_lof": 10,
    "T_lof": 1.6,
    "T_nnd": 1.5,
    "seed": 0,
    "mode": "changed",
    "retrieval": "lmd",
    "laps": 2,
    "noise": 0.01,
    "lane_shift": 0.0,
    "aliased": 0,
    "db_stride": 1,
    "revisit_cutoff": REVISIT_CUTOFF,
    "pairing": "nn",
    "pose_tol": 2.0,
    "top_masks": 10,
    "tol": HIT_TOLERANCE,
}


def load_config(source):
    """Parse a flat key-value config (``key value`` or ``key = value`` lines).

    Unknown keys and out-of-range values are errors; values are cast to
    the type of their default.
    """
    cfg = dict(DEFAULT_CONFIG)
    if isinstance(source, dict):
        items = source.items()
    else:
        text = Path(source).read_text() if not isinstance(source, io.IOBase) else source.read()
        items = []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace("=", " ").split(None, 1)
            if len(parts) != 2:
                raise ValueError(f"malformed config line: {raw!r}")
            items.append((parts[0], parts[1].strip()))
    for key, value in items:
        if key not in cfg:
            raise ValueError(f"unknown config key {key!r}")
        cfg[key] = type(cfg[key])(value)
    if not 1 <= cfg["descriptor_id"] <= 8:
        raise ValueError("descriptor_id must be 1..8")
    if cfg["planner"] not in ("cog", "cor"):
        raise ValueError("planner must be cog or cor")
    if cfg["mode"] not in ("changed", "stationary"):
        raise ValueError("mode must be changed or stationary")
    if cfg["retrieval"] not in ("lmd", "bow"):
        raise ValueError("retrieval must be lmd or bow")
    if cfg["db_stride"] < 1:
        raise ValueError("db_stride must be >= 1")
    if cfg["pairing"] not in ("nn", "pose"):
        raise ValueError("pairing must be nn or pose")
    return cfg


def map_seed(seed, tag, k):
    """Deterministic per-map seed stream."""
    return np.random.SeedSequence([int(seed), int(tag), int(k)])


def build_database(maps, planner, cfg_r, cfg_c, q, seed):
    """Plan, describe, and index every map; returns (index, query-side lmds)."""
    index = InvertedIndex(cfg_r, PyramidConfig(), q)
    lmds = {}
    for k, m in enumerate(maps):
        scene = plan_scene(m, planner, seed=map_seed(seed, 1, k))
        lmd = build_lmd(m, scene.viewpoint, cfg_r, cfg_c, q=q, grid=scene.grid)
        lmds[m.id] = lmd
        index_insert(index, lmd)
    return index, lmds


def run_experiment(config, out_dir=None, maps=None):
    """End-to-end seeded experiment; optionally writes the CSV artifacts.

    Builds the benchmark (unless ``maps`` is supplied), indexes every
    map, runs each ground-truth query in the configured mode, and
    reduces ranks to Metrics. Artifacts: metrics.txt, per_task.csv,
    recall_curve.csv.
    """
    from lmdkit.synth import synthetic_maps

    cfg = load_config(config)
    cfg_r = retrieval_config(cfg["descriptor_id"], seed=cfg["seed"])
    cfg_c = change_config(seed=cfg["seed"])
    det = DetectorConfig(
        k_lof=cfg["K_lof"], t_lof=cfg["T_lof"], t_nnd=cfg["T_nnd"]
    )
    if maps is None:
        maps = synthetic_maps(
            cfg["seed"], cfg["laps"], cfg["window"], cfg["stride"],
            noise=cfg["noise"], lane_shift=cfg["lane_shift"], aliased=bool(cfg["aliased"]),
        )
    db_idx = list(range(0, len(maps), cfg["db_stride"]))
    db = db_idx if cfg["db_stride"] > 1 else None
    pairs = ground_truth_pairs(
        maps,
        revisit_cutoff=cfg["revisit_cutoff"],
        db=db,
        pairing=cfg["pairing"],
        pose_tol=cfg["pose_tol"],
    )
    index, lmds = build_database(
        [maps[i] for i in db_idx], cfg["planner"], cfg_r, cfg_c, cfg["q"], cfg["seed"]
    )
    by_id = {m.id: (k, m) for k, m in enumerate(maps)}
    rows = []
    tasks = []
    masks_per_query = {}
    gt_per_query = {}
    for pair in pairs:
        qk, qmap = by_id[pair.query_id]
        eligible_ids = {maps[ci].id for ci in _eligible(maps, qk, db=db)}
        n = len(eligible_ids)
        gt_points = np.empty((0, 2))
        if cfg["mode"] == "changed":
            sim = inject_change(qmap, seed=map_seed(cfg["seed"], 2, qk))
            qmap = sim.modified_map
            gt_points = sim.ground_truth
        scene = plan_scene(qmap, cfg["planner"], seed=map_seed(cfg["seed"], 3, qk))
        qlmd = build_lmd(qmap, scene.viewpoint, cfg_r, cfg_c, q=cfg["q"], grid=scene.grid)
        if cfg["retrieval"] == "bow":
            results = bow_ranked(index, [rotate_lmd(qlmd, i) for i in range(4)])
            top = []
        else:
            results = query_ranked(index, qlmd, top_k=len(index))
            top = [r for r in results if r.map_id in eligible_ids][: cfg["top_masks"]]
        rank = rank_of(results, pair.db_id, eligible_ids)
        k_rel = next((r.score for r in results if r.map_id == pair.db_id), 0.0)
        masks = []
        world_points = {}
        for r in top:
            rot = rotate_lmd(qlmd, r.orientation)
            mask = detect_changes(rot, index.descriptors[r.map_id], r.score, det, r.offset)
            if len(mask):
                world_points[(mask.db_id)] = flagged_world_points(
                    mask.points, qlmd.viewpoint, r.orientation
                )
            masks.append(mask)
        ranked_masks = rank_change_masks(masks)
        masks_per_query[pair.query_id] = [world_points[m.db_id] for m in ranked_masks]
        gt_per_query[pair.query_id] = gt_points
        hit_rank = 0
        if len(gt_points):
            for kk, pts in enumerate(masks_per_query[pair.query_id], start=1):
                if _any_within(pts, gt_points, cfg["tol"]):
                    hit_rank = kk
                    break
        mask_size = len(ranked_masks[0]) if ranked_masks else 0
        tasks.append((pair.query_id[0], rank, n))
        rows.append(
            (
                f"{pair.query_id[0]}:{pair.query_id[1]}",
                pair.query_id[0],
                rank,
                n,
                k_rel,
                mask_size,
                hit_rank,
            )
        )
    ranks = [(rank, n) for _, rank, n in tasks]
    curve = (
        change_recall_curve(masks_per_query, gt_per_query, cfg["tol"], cfg["top_masks"])
        if cfg["mode"] == "changed"
        else []
    )
    metrics = Metrics(
        anr_per_query=anr(ranks),
        anr_per_dataset=anr_per_dataset(tasks),
        topx_rates={x: recognition_rate(ranks, x) for x in (1, 5, 10, 20)},
        recall_curve=curve,
        n_tasks=len(ranks),
        n_db=len(index),
    )
    if out_dir is not None:
        write_artifacts(Path(out_dir), metrics, rows)
    return metrics


def cor_stability(seed=0, n_scenes=100, delete_frac=0.1, move_tol=0.5):
    """Fraction of scenes whose CoR viewpoint survives wall deletion.

    For each synthetic scene the room-center viewpoint is planned twice:
    once as-is and once after a random ``delete_frac`` of the occupied
    cells is relabeled free. Returns the fraction of scenes where the
    viewpoint moved at most ``move_tol`` meters.
    """
    from lmdkit.ingest import FREE, OCCUPIED, OccupancyGrid
    from lmdkit.planner import plan_viewpoint_cor
    from lmdkit.synth import synthetic_maps

    maps = synthetic_maps(seed, laps=1)[:n_scenes]
    ok = 0
    for k, m in enumerate(maps):
        scene = plan_scene(m, "cor", seed=map_seed(seed, 5, k))
        labels = scene.grid.labels.copy()
        occ = np.argwhere(labels == OCCUPIED)
        rng = np.random.default_rng(map_seed(seed, 4, k))
        drop = occ[rng.choice(len(occ), size=int(len(occ) * delete_frac), replace=False)]
        labels[drop[:, 0], drop[:, 1]] = FREE
        thinned = OccupancyGrid(
            resolution=scene.grid.resolution,
            origin=scene.grid.origin,
            labels=labels,
            counts=scene.grid.counts,
        )
        vp2 = plan_viewpoint_cor(thinned, scene.frame, seed=map_seed(seed, 5, k))
        if float(np.linalg.norm(vp2.position - scene.viewpoint.position)) <= move_tol:
            ok += 1
    return ok / len(maps)


@dataclass
class ChangeBenchmark:
    n_tasks: int
    n_flagged: int
    n_hits: int
    frac_within: float
    changed_mean_flags: float
    changed_mean_flags_t0: float
    stationary_mean_flags: float
    stationary_mean_flags_t0: float


def change_benchmark(config, maps=None, max_tasks=0):
    """Detector quality over aligned loop-closure pairs.

    Each ground-truth pair is replayed twice against its known database
    partner: once with an injected change in the query map and once
    stationary. Using the known partner isolates the detector chain
    (orientation hypotheses, offset correction, outlier filtering, ratio
    test) from retrieval. Pairs whose injected change is observed by
    fewer than MIN_OBSERVABLE_GT map points are skipped as unobservable.

    Reports the fraction of changed-run flagged points within ``tol`` of
    the change (either endpoint: the points that moved or vanished, and
    where they went), plus mean flagged counts per mode at the
    configured ratio threshold and at zero. ``max_tasks`` > 0 caps the
    number of replayed pairs.
    """
    from lmdkit.synth import synthetic_maps

    cfg = load_config(config)
    cfg_r = retrieval_config(cfg["descriptor_id"], seed=cfg["seed"])
    cfg_c = change_config(seed=cfg["seed"])
    det = DetectorConfig(k_lof=cfg["K_lof"], t_lof=cfg["T_lof"], t_nnd=cfg["T_nnd"])
    pyr = PyramidConfig()
    if maps is None:
        maps = synthetic_maps(
            cfg["seed"], cfg["laps"], cfg["window"], cfg["stride"],
            noise=cfg["noise"], lane_shift=cfg["lane_shift"], aliased=bool(cfg["aliased"]),
        )
    pairs = ground_truth_pairs(maps)
    by_id = {m.id: (k, m) for k, m in enumerate(maps)}
    n_tasks = 0
    hits = 0
    flagged = 0
    counts = {"changed": ([], []), "stationary": ([], [])}
    for pair in pairs:
        qk, qmap = by_id[pair.query_id]
        dk, dmap = by_id[pair.db_id]
        sim = inject_change(qmap, seed=map_seed(cfg["seed"], 2, qk))
        if len(sim.ground_truth) < MIN_OBSERVABLE_GT:
            continue
        if max_tasks and n_tasks >= max_tasks:
            break
        n_tasks += 1
        gt = np.vstack([sim.ground_truth, qmap.points[sim.modified_indices]])
        tree = cKDTree(gt)
        scene_d = plan_scene(dmap, cfg["planner"], seed=map_seed(cfg["seed"], 1, dk))
        db = build_lmd(dmap, scene_d.viewpoint, cfg_r, cfg_c, q=cfg["q"], grid=scene_d.grid)
        for mode, src in (("changed", sim.modified_map), ("stationary", qmap)):
            scene_q = plan_scene(src, cfg["planner"], seed=map_seed(cfg["seed"], 3, qk))
            qlmd = build_lmd(src, scene_q.viewpoint, cfg_r, cfg_c, q=cfg["q"], grid=scene_q.grid)
            rots = query_rotations(qlmd)
            k_pair, i = score_against(rots, db, pyr)
            rot = rots[i]
            offset = estimate_offset(rot, db, i)
            survivors = filter_outliers(rot, det)
            nnd = nn_d_scores_all(rot, db, offset, det)
            m_t = mask_from_scores(rot, db, survivors, nnd, k_pair, det.t_nnd)
            m_0 = mask_from_scores(rot, db, survivors, nnd, k_pair, 0.0)
            counts[mode][0].append(len(m_t))
            counts[mode][1].append(len(m_0))
            if mode == "changed" and len(m_t):
                world = flagged_world_points(m_t.points, qlmd.viewpoint, i)
                hits += int((tree.query(world)[0] <= cfg["tol"]).sum())
                flagged += len(world)

    def _mean(v):
        return float(np.mean(v)) if v else 0.0

    return ChangeBenchmark(
        n_tasks=n_tasks,
        n_flagged=flagged,
        n_hits=hits,
        frac_within=hits / flagged if flagged else 0.0,
        changed_mean_flags=_mean(counts["changed"][0]),
        changed_mean_flags_t0=_mean(counts["changed"][1]),
        stationary_mean_flags=_mean(counts["stationary"][0]),
        stationary_mean_flags_t0=_mean(counts["stationary"][1]),
    )


def threshold_recall(config, thresholds=(1.0, 2.0, 3.0, 7.0, 8.0), maps=None, max_tasks=0):
    """Recall of ranked change masks at several ratio thresholds.

    Runs the retrieval pipeline once per change task, then rethresholds
    the per-pair distance ratios, so every threshold shares identical
    retrieval, orientation, and offset decisions. Returns {threshold:
    recall at the bottom of the top-``top_masks`` curve}.
    """
    from lmdkit.synth import synthetic_maps

    cfg = load_config(config)
    cfg_r = retrieval_config(cfg["descriptor_id"], seed=cfg["seed"])
    cfg_c = change_config(seed=cfg["seed"])
    det = DetectorConfig(k_lof=cfg["K_lof"], t_lof=cfg["T_lof"], t_nnd=cfg["T_nnd"])
    if maps is None:
        maps = synthetic_maps(
            cfg["seed"], cfg["laps"], cfg["window"], cfg["stride"],
            noise=cfg["noise"], lane_shift=cfg["lane_shift"], aliased=bool(cfg["aliased"]),
        )
    pairs = ground_truth_pairs(maps)
    if max_tasks:
        pairs = pairs[:max_tasks]
    index, _ = build_database(maps, cfg["planner"], cfg_r, cfg_c, cfg["q"], cfg["seed"])
    by_id = {m.id: (k, m) for k, m in enumerate(maps)}
    masks = {t: {} for t in thresholds}
    gt_per_query = {}
    for pair in pairs:
        qk, qmap = by_id[pair.query_id]
        eligible_ids = {maps[ci].id for ci in _eligible(maps, qk)}
        sim = inject_change(qmap, seed=map_seed(cfg["seed"], 2, qk))
        gt_per_query[pair.query_id] = sim.ground_truth
        scene = plan_scene(sim.modified_map, cfg["planner"], seed=map_seed(cfg["seed"], 3, qk))
        qlmd = build_lmd(sim.modified_map, scene.viewpoint, cfg_r, cfg_c, q=cfg["q"], grid=scene.grid)
        results = query_ranked(index, qlmd, top_k=len(index))
        top = [r for r in results if r.map_id in eligible_ids][: cfg["top_masks"]]
        per_t = {t: [] for t in thresholds}
        orient = {}
        for r in top:
            rot = rotate_lmd(qlmd, r.orientation)
            dbl = index.descriptors[r.map_id]
            survivors = filter_outliers(rot, det)
            nnd = nn_d_scores_all(rot, dbl, r.offset, det)
            orient[r.map_id] = r.orientation
            for t in thresholds:
                per_t[t].append(mask_from_scores(rot, dbl, survivors, nnd, r.score, t))
        for t in thresholds:
            ranked = rank_change_masks(per_t[t])
            masks[t][pair.query_id] = [
                flagged_world_points(m.points, qlmd.viewpoint, orient[m.db_id]) for m in ranked
            ]
    out = {}
    for t in thresholds:
        curve = change_recall_curve(masks[t], gt_per_query, cfg["tol"], cfg["top_masks"])
        out[t] = curve[-1][1]
    return out


def write_artifacts(out_dir, metrics, rows):
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [
        f"anr_per_dataset {metrics.anr_per_dataset:.6f}",
        f"anr_per_query {metrics.anr_per_query:.6f}",
        f"n_db {metrics.n_db}",
        f"n_tasks {metrics.n_tasks}",
    ]
    lines += [f"top{x} {rate:.6f}" for x, rate in sorted(metrics.topx_rates.items())]
    (out_dir / "metrics.txt").write_text("\n".join(lines) + "\n")
    body = ["query,dataset,gt_rank,N,K,mask_size,hit_rank"]
    body += [
        f"{q},{d},{rank},{n},{k:.6f},{ms},{hr}" for q, d, rank, n, k, ms, hr in rows
    ]
    (out_dir / "per_task.csv").write_text("\n".join(body) + "\n")
    curve = ["rank,recall"]
    curve += [f"{k},{rec:.6f}" for k, rec in metrics.recall_curve]
    (out_dir / "recall_curve.csv").write_text("\n".join(curve) + "\n")
