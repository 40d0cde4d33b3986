"""Command-line interface.

Subcommands cover the pipeline end to end (``eval``) and stage by stage
(``explore``, ``build-memory``, ``inject-language``, ``localize``,
``navigate``), plus ``ablate`` for paired comparison runs. The output root
defaults to $SPLATNAV_OUT or ./runs; every command exits nonzero with a
stage tag on failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from .camera import Pose
from .codebook import Codebook, associate, build_codebook
from .episodes import generate_episode, load_episode, save_episode
from .explorer import explore
from .features import FeatureOptConfig, optimize_features
from .imageio import ensure_dir
from .mapping import load_map, save_map
from .metrics import MetricsReport
from .navigator import TrajectoryTrace, navigate_subtask
from .optimize import reconstruct
from .perception import make_providers
from .pipeline import (
    PipelineError,
    RunConfig,
    eval_localization,
    load_frames,
    load_scene_arg,
    run_navigation,
    run_pipeline,
    save_frames,
    stage_seeds,
)
from .simulator import World
from .splat import GaussianMemory


def _out_root() -> Path:
    return Path(os.environ.get("SPLATNAV_OUT", "runs"))


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scene", default="four_rooms",
                   help="fixture name (smoke/medium/four_rooms) or scene file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--width", type=int, default=160)
    p.add_argument("--height", type=int, default=120)
    p.add_argument("--quiet", action="store_true")


def _add_memory_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--p1", type=int, default=30)
    p.add_argument("--p2", type=int, default=60)
    p.add_argument("--lambda", dest="ssim_weight", type=float, default=0.2)
    p.add_argument("--mu-d", dest="depth_weight", type=float, default=1.0)
    p.add_argument("--frame-stride", type=int, default=6)


def _add_language_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k1", type=int, default=32)
    p.add_argument("--k2", type=int, default=5)
    p.add_argument("--w-pos", type=float, default=1.0)
    p.add_argument("--feature-iters", type=int, default=500)
    p.add_argument("--perception", default="oracle",
                   help='"oracle" or "oracle-noisy:<sigma>,<dropout>"')


def _add_nav_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--episode", default=None, help="episode file (else generated)")
    p.add_argument("--episode-seed", type=int, default=1)
    p.add_argument("--n-subtasks", type=int, default=20)
    p.add_argument("--step-limit", type=int, default=200)
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--verify-fn", type=float, default=0.0,
                   help="verification false-negative rate")
    p.add_argument("--decoys", type=int, default=0)


def _config_from(args) -> RunConfig:
    cfg = RunConfig(scene=args.scene, seed=args.seed,
                    out_dir=args.out, width=args.width, height=args.height)
    for name in ("explore_budget", "map_resolution", "map_stride", "p1", "p2",
                 "ssim_weight", "depth_weight", "feature_iters", "k1", "k2",
                 "w_pos", "perception", "episode", "episode_seed", "n_subtasks",
                 "step_limit", "top_k", "decoys", "memory_frame_stride"):
        if hasattr(args, name):
            setattr(cfg, name, getattr(args, name))
    if hasattr(args, "frame_stride"):
        cfg.memory_frame_stride = args.frame_stride
    if hasattr(args, "verify_fn"):
        cfg.verify_false_negative = args.verify_fn
    if hasattr(args, "ablate_keyframe"):
        cfg.ablate_keyframe = args.ablate_keyframe
    if hasattr(args, "ablate_verification"):
        cfg.ablate_verification = args.ablate_verification
    return cfg


def _progress(args):
    if args.quiet:
        return None
    return lambda msg: print(msg, flush=True)


def cmd_explore(args) -> int:
    out = ensure_dir(args.out or _out_root() / "explore")
    cfg = _config_from(args)
    world = World(load_scene_arg(cfg.scene), cfg.camera())
    if args.episode:
        start = load_episode(args.episode).start_pose
    else:
        from .episodes import random_free_pose
        start = random_free_pose(world, np.random.default_rng(cfg.episode_seed))
    res = explore(world, start, cfg.explore_budget, cfg.camera(),
                  cfg.map_resolution, cfg.map_stride)
    save_map(res.occmap, out / "map.pgm", out / "map.json")
    save_frames(res.frames, res.steps, out / "frames.npz")
    (out / "explore.json").write_text(json.dumps({
        "steps": res.steps, "frames": len(res.frames),
        "final_pose": [res.pose.x, res.pose.y, res.pose.z,
                       res.pose.yaw, res.pose.pitch],
        "unknown_cells": res.occmap.unknown_count(),
    }, indent=2, sort_keys=True))
    print(f"explored {res.steps} steps -> {out}")
    return 0


def cmd_build_memory(args) -> int:
    out = ensure_dir(args.out or _out_root() / "memory")
    cfg = _config_from(args)
    frames = load_frames(args.frames)[::max(cfg.memory_frame_stride, 1)]
    seeds = stage_seeds(cfg.seed)
    memory, pool = reconstruct(frames, cfg.camera(), cfg.memory_config(),
                               seeds["memory"],
                               progress=None if args.quiet else
                               lambda t, n, g: print(f"frame {t + 1}/{n}: {g} gaussians",
                                                     flush=True))
    memory.scene_ref = cfg.scene
    memory.save(out / "memory.gsm")
    (out / "memory.json").write_text(json.dumps({
        "gaussians": memory.count,
        "mean_pool_psnr_db": pool.mean_psnr(),
        "frames": len(frames),
    }, indent=2, sort_keys=True))
    print(f"memory: {memory.count} gaussians, "
          f"pool PSNR {pool.mean_psnr():.2f} dB -> {out}")
    return 0


def cmd_inject_language(args) -> int:
    out = ensure_dir(args.out or _out_root() / "language")
    cfg = _config_from(args)
    scene = load_scene_arg(cfg.scene)
    frames = load_frames(args.frames)[::max(cfg.memory_frame_stride, 1)]
    memory = GaussianMemory.load(args.memory)
    memory.frozen = False
    seeds = stage_seeds(cfg.seed)
    providers = make_providers(scene, seed=cfg.seed, noise=cfg.noise(),
                               dim=cfg.dim_2d)
    optimize_features(memory, frames, cfg.camera(), providers,
                      FeatureOptConfig(iters=cfg.feature_iters),
                      seeds["features"])
    memory.freeze()
    codebook = build_codebook(memory, cfg.k1, cfg.k2, cfg.w_pos,
                              int(seeds["codebook"].integers(2 ** 31)),
                              cfg.dim_2d)
    associate(codebook, memory, frames, cfg.camera(), providers,
              cfg.assoc_stride)
    memory.save(out / "memory.gsm")
    codebook.save(out / "codebook.gscb")
    print(f"codebook: {len(codebook)} entries "
          f"({len(codebook.associated_entries())} associated) -> {out}")
    return 0


def _load_episode_or_generate(args, cfg, world):
    if args.episode:
        return load_episode(args.episode)
    return generate_episode(world, cfg.episode_seed, cfg.n_subtasks,
                            scene_path=cfg.scene)


def cmd_localize(args) -> int:
    out = ensure_dir(args.out or _out_root() / "localize")
    cfg = _config_from(args)
    scene = load_scene_arg(cfg.scene)
    world = World(scene, cfg.camera())
    codebook = Codebook.load(args.codebook)
    providers = make_providers(scene, seed=cfg.seed, noise=cfg.noise(),
                               dim=cfg.dim_2d)
    episode = _load_episode_or_generate(args, cfg, world)
    loc = eval_localization(codebook, episode.subtasks, providers,
                            cfg.localization_radius, cfg.top_k)
    doc = {"accuracy": loc.accuracy, "by_modality": loc.by_modality,
           "per_goal": loc.per_goal}
    (out / "localization.json").write_text(json.dumps(doc, indent=2,
                                                      sort_keys=True))
    print(f"localization accuracy {loc.accuracy:.3f} -> {out}")
    return 0


def cmd_navigate(args) -> int:
    out = ensure_dir(args.out or _out_root() / "navigate")
    cfg = _config_from(args)
    scene = load_scene_arg(cfg.scene)
    world = World(scene, cfg.camera())
    occmap = load_map(args.map_pgm, args.map_meta)
    codebook = Codebook.load(args.codebook)
    providers = make_providers(scene, seed=cfg.seed, noise=cfg.noise(),
                               dim=cfg.dim_2d)
    episode = _load_episode_or_generate(args, cfg, world)
    start = episode.start_pose
    if args.start_pose:
        v = [float(t) for t in args.start_pose.split(",")]
        start = Pose(x=v[0], y=v[1], yaw=v[2] if len(v) > 2 else 0.0)
    settings = cfg.nav_settings()
    results = []
    pose = start
    seeds = stage_seeds(cfg.seed)
    from .pipeline import make_decoy_codebook
    from .navigator import encode_goal
    for i, goal in enumerate(episode.subtasks):
        cb = codebook
        if cfg.decoys > 0:
            q = encode_goal(goal, providers)
            cb = make_decoy_codebook(codebook, q.embedding, goal.gt_position,
                                     seeds["decoys"], cfg.decoys)
        trace = TrajectoryTrace()
        result, pose = navigate_subtask(world, occmap, cb, goal, providers,
                                        pose, cfg.camera(), settings, trace)
        trace.save(out / f"traj_{i:03d}.jsonl")
        results.append(result)
        if not args.quiet:
            print(f"subtask {i}: {goal.modality:8s} "
                  f"{'OK ' if result.success else 'FAIL'} steps={result.steps}",
                  flush=True)
    report = MetricsReport(seed=cfg.seed, scene=cfg.scene)
    report.fill_navigation(results)
    report.validate()
    report.save(out / "metrics.json")
    print(f"SR {report.sr:.3f} SPL {report.spl:.3f} -> {out}")
    return 0


def cmd_eval(args) -> int:
    cfg = _config_from(args)
    cfg.out_dir = str(args.out or _out_root() / "eval")
    report = run_pipeline(cfg, do_localization=not args.no_localization,
                          do_navigation=not args.no_navigation,
                          progress=_progress(args))
    parts = []
    if report.localization_accuracy is not None:
        parts.append(f"loc {report.localization_accuracy:.3f}")
    if report.sr is not None:
        parts.append(f"SR {report.sr:.3f} SPL {report.spl:.3f}")
    parts.append(f"pool PSNR {report.mean_pool_psnr:.2f} dB")
    print(" | ".join(parts) + f" -> {cfg.out_dir}")
    return 0


def cmd_ablate(args) -> int:
    out = ensure_dir(args.out or _out_root() / f"ablate_{args.which}")
    base = _config_from(args)
    runs: dict[str, RunConfig] = {}
    if args.which == "keyframe":
        runs["full"] = dataclasses.replace(base, ablate_keyframe=False)
        runs["no_keyframe"] = dataclasses.replace(base, ablate_keyframe=True)
        do_nav = False
    elif args.which == "verification":
        base = dataclasses.replace(base, decoys=max(base.decoys, 2),
                                   verify_false_negative=max(
                                       base.verify_false_negative, 0.2))
        runs["full"] = dataclasses.replace(base, ablate_verification=False)
        runs["no_verification"] = dataclasses.replace(base,
                                                      ablate_verification=True)
        do_nav = True
    elif args.which == "noise":
        for sigma in (0.0, 0.05, 0.1, 0.2):
            runs[f"sigma_{sigma}"] = dataclasses.replace(
                base, perception=f"oracle-noisy:{sigma},0")
        do_nav = False
    else:
        print(f"unknown ablation {args.which!r}", file=sys.stderr)
        return 2
    summary = {}
    for name, cfg in runs.items():
        cfg.out_dir = str(out / name)
        report = run_pipeline(cfg, do_localization=True, do_navigation=do_nav,
                              progress=_progress(args))
        summary[name] = report.to_dict()
        print(f"[{name}] pool PSNR {report.mean_pool_psnr:.2f} dB"
              + (f", SR {report.sr:.3f}" if report.sr is not None else "")
              + (f", loc {report.localization_accuracy:.3f}"
                 if report.localization_accuracy is not None else ""))
    (out / f"ablate_{args.which}.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True))
    print(f"ablation summary -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="splatnav",
                                 description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("explore", help="frontier exploration; dumps map+frames")
    _add_common(p)
    p.add_argument("--explore-budget", type=int, default=1500)
    p.add_argument("--map-res", dest="map_resolution", type=float, default=0.05)
    p.add_argument("--episode", default=None,
                   help="take the start pose from this episode file")
    p.add_argument("--episode-seed", type=int, default=1)
    p.set_defaults(fn=cmd_explore)

    p = sub.add_parser("build-memory", help="reconstruct a memory from frames")
    _add_common(p)
    _add_memory_flags(p)
    p.add_argument("--frames", required=True)
    p.set_defaults(fn=cmd_build_memory)

    p = sub.add_parser("inject-language",
                       help="feature training, codebook, 2D-3D association")
    _add_common(p)
    _add_language_flags(p)
    p.add_argument("--frames", required=True)
    p.add_argument("--memory", required=True)
    p.add_argument("--frame-stride", type=int, default=6)
    p.set_defaults(fn=cmd_inject_language)

    p = sub.add_parser("localize", help="top-k goal localization accuracy")
    _add_common(p)
    _add_language_flags(p)
    _add_nav_flags(p)
    p.add_argument("--codebook", required=True)
    p.set_defaults(fn=cmd_localize)

    p = sub.add_parser("navigate", help="memory-guided navigation on an episode")
    _add_common(p)
    _add_language_flags(p)
    _add_nav_flags(p)
    p.add_argument("--codebook", required=True)
    p.add_argument("--map-pgm", required=True)
    p.add_argument("--map-meta", required=True)
    p.add_argument("--start-pose", default=None, help='"x,y[,yaw]"')
    p.set_defaults(fn=cmd_navigate)

    p = sub.add_parser("eval", help="full pipeline: explore through metrics")
    _add_common(p)
    p.add_argument("--explore-budget", type=int, default=1500)
    p.add_argument("--map-res", dest="map_resolution", type=float, default=0.05)
    _add_memory_flags(p)
    _add_language_flags(p)
    _add_nav_flags(p)
    p.add_argument("--no-localization", action="store_true")
    p.add_argument("--no-navigation", action="store_true")
    p.add_argument("--ablate-keyframe", action="store_true")
    p.add_argument("--ablate-verification", action="store_true")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("ablate", help="paired ablation runs")
    _add_common(p)
    p.add_argument("--which", required=True,
                   choices=("keyframe", "verification", "noise"))
    p.add_argument("--explore-budget", type=int, default=1500)
    _add_memory_flags(p)
    _add_language_flags(p)
    _add_nav_flags(p)
    p.set_defaults(fn=cmd_ablate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except PipelineError as exc:
        print(f"error [stage:{exc.stage}]: {exc.cause}", file=sys.stderr)
        return 2
    except Exception as exc:  # surface anything else with a generic tag
        print(f"error [stage:cli]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
