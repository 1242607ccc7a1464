"""Command-line front end.

Subcommands cover the pipeline end to end: ingest logs into map
records, plan viewpoints, build and query indexes, detect changes,
inject synthetic changes, generate the synthetic benchmark, and run
batch evaluations.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from lmdkit import archive, evaluate
from lmdkit.changes import DetectorConfig, detect_changes, rank_change_masks
from lmdkit.descriptor import build_lmd, change_config, retrieval_config
from lmdkit.ingest import parse_carmen_log, segment_local_maps
from lmdkit.planner import plan_scene
from lmdkit.retrieval import InvertedIndex, PyramidConfig, index_insert, query_ranked, rotate_lmd
from lmdkit.simulate import inject_change
from lmdkit.synth import synthetic_maps


def _save_maps(maps, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for m in maps:
        archive.save_local_map(m, out / f"{m.id[1]:05d}.lmap")
    return len(maps)


def cmd_ingest(args):
    with open(args.log) as fh:
        scans = parse_carmen_log(fh)
    maps = segment_local_maps(scans, args.window, args.stride, dataset=args.dataset)
    n = _save_maps(maps, args.out)
    print(f"wrote {n} maps from {len(scans)} scans to {args.out}")


def cmd_plan(args):
    local_map = archive.load_local_map(args.map)
    scene = plan_scene(local_map, args.method, seed=args.seed)
    vp = scene.viewpoint
    print(f"map {local_map.id[0]}:{local_map.id[1]}")
    print(f"method {vp.method}")
    print(f"theta {vp.frame.theta:.9f}")
    print(f"position {vp.position[0]:.6f} {vp.position[1]:.6f}")
    if args.grid_dump:
        np.savetxt(args.grid_dump, scene.grid.labels, fmt="%d")
        print(f"grid {args.grid_dump}")


def _build_query_lmd(args, index):
    local_map = archive.load_local_map(args.map if hasattr(args, "map") else args.query)
    scene = plan_scene(local_map, args.planner, seed=args.seed)
    cfg_r = index.retrieval_cfg
    ccfg = change_config(seed=cfg_r.seed)
    return build_lmd(local_map, scene.viewpoint, cfg_r, ccfg, q=index.q, grid=scene.grid)


def cmd_build_index(args):
    cfg_r = retrieval_config(args.config_id, seed=args.seed)
    ccfg = change_config(seed=args.seed)
    index = InvertedIndex(cfg_r, PyramidConfig(), args.q)
    paths = sorted(Path(args.maps).glob("*.lmap"))
    if not paths:
        sys.exit(f"no .lmap records under {args.maps}")
    for k, path in enumerate(paths):
        m = archive.load_local_map(path)
        scene = plan_scene(m, args.planner, seed=np.random.SeedSequence([args.seed, 1, k]))
        index_insert(index, build_lmd(m, scene.viewpoint, cfg_r, ccfg, q=args.q, grid=scene.grid))
    archive.save_index(index, args.out)
    print(f"indexed {len(index)} maps into {args.out}")


def cmd_query(args):
    index = archive.load_index(args.index)
    qlmd = _build_query_lmd(args, index)
    results = query_ranked(index, qlmd, top_k=args.top)
    for rank, r in enumerate(results, start=1):
        print(
            f"{rank} {r.map_id[0]}:{r.map_id[1]} K={r.score:.4f} "
            f"i={r.orientation} offset=({r.offset[0]},{r.offset[1]})"
        )
    if not results:
        print("no matches")


def cmd_detect(args):
    index = archive.load_index(args.index)
    qlmd = _build_query_lmd(args, index)
    det = DetectorConfig(t_nnd=args.t_nnd)
    results = query_ranked(index, qlmd, top_k=args.top)
    masks = []
    for r in results:
        rot = rotate_lmd(qlmd, r.orientation)
        masks.append(detect_changes(rot, index.descriptors[r.map_id], r.score, det, r.offset))
    ranked = rank_change_masks(masks)
    rows = ["db,K,x,y,r"]
    for mask in ranked:
        print(f"mask vs {mask.db_id[0]}:{mask.db_id[1]} K={mask.rank_score:.4f} n={len(mask)}")
        for (x, y), rv in zip(mask.points, mask.scores):
            print(f"  {x:.3f} {y:.3f} r={rv:.3f}")
            rows.append(f"{mask.db_id[0]}:{mask.db_id[1]},{mask.rank_score:.6f},{x:.6f},{y:.6f},{rv:.6f}")
    if not ranked:
        print("no changes flagged")
    if args.csv:
        Path(args.csv).write_text("\n".join(rows) + "\n")


def cmd_simulate(args):
    local_map = archive.load_local_map(args.map)
    sim = inject_change(local_map, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    archive.save_local_map(sim.modified_map, out)
    gt_path = out.with_suffix(out.suffix + ".gt.txt")
    np.savetxt(gt_path, sim.ground_truth, fmt="%.6f")
    print(
        f"modified {len(sim.modified_indices)} of {len(local_map.points)} points; "
        f"map {out}, ground truth {gt_path}"
    )


def cmd_evaluate(args):
    maps = None
    if args.data:
        maps = []
        for d in args.data:
            paths = sorted(Path(d).glob("*.lmap"))
            if not paths:
                sys.exit(f"no .lmap records under {d}")
            maps.extend(archive.load_local_map(p) for p in paths)
    metrics = evaluate.run_experiment(args.config, out_dir=args.out, maps=maps)
    print(f"tasks {metrics.n_tasks} db {metrics.n_db}")
    print(f"anr_per_query {metrics.anr_per_query:.3f}")
    print(f"anr_per_dataset {metrics.anr_per_dataset:.3f}")
    for x, rate in sorted(metrics.topx_rates.items()):
        print(f"top{x} {rate:.3f}")


def cmd_synth(args):
    maps = synthetic_maps(args.seed, laps=args.laps, noise=args.noise)
    n = _save_maps(maps, args.out)
    print(f"wrote {n} synthetic maps to {args.out}")


def main(argv=None):
    parser = argparse.ArgumentParser(prog="lmdkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a robot log into local map records")
    p.add_argument("--log", required=True)
    p.add_argument("--window", type=float, default=5.0)
    p.add_argument("--stride", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--dataset", default="default")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("plan", help="plan the canonical viewpoint of one map")
    p.add_argument("--map", required=True)
    p.add_argument("--method", choices=("cog", "cor"), default="cog")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-dump")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("build-index", help="index a directory of map records")
    p.add_argument("--maps", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config-id", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--planner", choices=("cog", "cor"), default="cog")
    p.add_argument("--q", type=float, default=0.25)
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("query", help="rank database maps against a query map")
    p.add_argument("--index", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--planner", choices=("cog", "cor"), default="cog")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("detect", help="flag changes against the top matches")
    p.add_argument("--index", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--t-nnd", type=float, default=1.5)
    p.add_argument("--planner", choices=("cog", "cor"), default="cog")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("simulate", help="inject a synthetic change into a map")
    p.add_argument("--map", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="run a batch experiment from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--data", nargs="*", default=None, help="map-record dirs; default: synthetic")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate the synthetic benchmark maps")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--laps", type=int, default=2)
    p.add_argument("--noise", type=float, default=0.01)
    p.set_defaults(func=cmd_synth)

    args = parser.parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()
