"""End-to-end runs: explore -> reconstruct -> inject language -> evaluate.

Each stage is wrapped so failures surface with a stage tag; all randomness
derives from one seed. ``RunConfig`` mirrors the CLI flags.
"""

from __future__ import annotations

import copy
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .camera import Camera, Pose
from .codebook import Codebook, associate, build_codebook
from .episodes import Episode, Goal, generate_episode, load_episode, save_episode
from .explorer import ExploreResult, explore
from .features import FeatureOptConfig, optimize_features
from .fixtures import FIXTURES, get_fixture
from .imageio import ensure_dir, map_to_pgm
from .mapping import OccupancyMap
from .metrics import MetricsReport, SubtaskResult
from .navigator import (
    NavigationSettings,
    TrajectoryTrace,
    VerifyThresholds,
    encode_goal,
    navigate_subtask,
    query_memory,
)
from .optimize import MemoryConfig, reconstruct
from .perception import NoiseConfig, OracleProviders, make_providers
from .scene import Scene, load_scene
from .simulator import World
from .splat import GaussianMemory


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[stage:{stage}] {cause}")


@dataclass
class RunConfig:
    scene: str = "four_rooms"        # fixture name or scene file path
    out_dir: str | None = None
    seed: int = 0
    # camera (desk scale by default)
    width: int = 160
    height: int = 120
    hfov_deg: float = 42.0
    # exploration / mapping
    explore_budget: int = 1500
    map_resolution: float = 0.05
    map_stride: int = 2
    # memory reconstruction
    memory_frame_stride: int = 6
    p1: int = 30
    p2: int = 60
    ssim_weight: float = 0.2
    depth_weight: float = 1.0
    insert_stride: int = 4
    # language injection
    feature_iters: int = 500
    k1: int = 32
    k2: int = 5
    w_pos: float = 1.0
    dim_2d: int = 64
    assoc_stride: int = 3
    # perception
    perception: str = "oracle"
    verify_false_negative: float = 0.0
    false_positive_rate: float = 0.0
    # episode / navigation
    episode: str | None = None
    episode_seed: int = 1
    n_subtasks: int = 20
    step_limit: int = 200
    top_k: int = 5
    localization_radius: float = 1.5
    # ablations
    ablate_keyframe: bool = False
    ablate_verification: bool = False
    decoys: int = 0

    def camera(self) -> Camera:
        return Camera.from_hfov(self.width, self.height, self.hfov_deg)

    def memory_config(self) -> MemoryConfig:
        return MemoryConfig(p1=self.p1,
                            p2=0 if self.ablate_keyframe else self.p2,
                            ssim_weight=self.ssim_weight,
                            depth_weight=self.depth_weight,
                            insert_stride=self.insert_stride)

    def noise(self) -> NoiseConfig:
        base = NoiseConfig.parse(self.perception)
        return dataclasses.replace(
            base, verify_false_negative=self.verify_false_negative,
            false_positive_rate=self.false_positive_rate)

    def nav_settings(self) -> NavigationSettings:
        return NavigationSettings(top_k=self.top_k, step_limit=self.step_limit,
                                  verification=not self.ablate_verification,
                                  map_stride=self.map_stride)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def load_scene_arg(spec: str) -> Scene:
    if spec in FIXTURES:
        return get_fixture(spec)
    return load_scene(spec)


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, exc) from exc


def stage_seeds(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(6)
    names = ("episode", "memory", "features", "codebook", "providers", "decoys")
    return {n: np.random.default_rng(s) for n, s in zip(names, children)}


def make_decoy_codebook(codebook: Codebook, query_embedding: np.ndarray,
                        goal_position: np.ndarray, rng: np.random.Generator,
                        n_decoys: int, min_distance_m: float = 3.0) -> Codebook:
    """Plant near-perfect wrong-entry matches far from the true goal."""
    out = copy.deepcopy(codebook)
    far = [i for i, e in enumerate(out.entries)
           if e.instance_feature is not None
           and np.hypot(e.centroid_3d[0] - goal_position[0],
                        e.centroid_3d[1] - goal_position[1]) > min_distance_m]
    rng.shuffle(far)
    for i in far[:n_decoys]:
        noise = rng.normal(size=query_embedding.shape[0])
        vec = query_embedding + 0.01 * noise / np.linalg.norm(noise)
        out.entries[i].instance_feature = vec / np.linalg.norm(vec)
    return out


@dataclass
class LocalizationResult:
    accuracy: float
    by_modality: dict[str, float]
    per_goal: list[dict] = field(default_factory=list)


def eval_localization(codebook: Codebook, goals: list[Goal],
                      providers: OracleProviders, radius: float = 1.5,
                      top_k: int = 5) -> LocalizationResult:
    """Top-k success: any returned entry centroid within ``radius`` (2D)."""
    per_goal = []
    hits: dict[str, list[float]] = {}
    for goal in goals:
        query = encode_goal(goal, providers)
        cands = query_memory(codebook, query, top_k)
        ok = False
        best_d = None
        for c in cands:
            e = codebook.entries[c.entry_index]
            d = float(np.hypot(e.centroid_3d[0] - goal.gt_position[0],
                               e.centroid_3d[1] - goal.gt_position[1]))
            best_d = d if best_d is None else min(best_d, d)
            if d <= radius:
                ok = True
                break
        hits.setdefault(goal.modality, []).append(1.0 if ok else 0.0)
        per_goal.append({"modality": goal.modality,
                         "instance": goal.gt_instance_id,
                         "hit": ok,
                         "best_distance": best_d})
    all_hits = [h for v in hits.values() for h in v]
    return LocalizationResult(
        accuracy=float(np.mean(all_hits)) if all_hits else 0.0,
        by_modality={m: float(np.mean(v)) for m, v in sorted(hits.items())},
        per_goal=per_goal)


@dataclass
class PipelineArtifacts:
    world: World
    occmap: OccupancyMap
    frames: list
    memory: GaussianMemory
    pool_mean_psnr: float
    codebook: Codebook
    providers: OracleProviders
    episode: Episode
    explore_steps: int
    final_pose: Pose


def build_artifacts(config: RunConfig, scene: Scene | None = None,
                    progress=None) -> PipelineArtifacts:
    """Run every stage up to (not including) evaluation."""
    seeds = stage_seeds(config.seed)
    scene = scene if scene is not None else _stage("load-scene", load_scene_arg,
                                                   config.scene)
    camera = config.camera()
    world = World(scene, camera)

    def note(msg):
        if progress:
            progress(msg)

    if config.episode:
        episode = _stage("episode", load_episode, config.episode)
    else:
        episode = _stage("episode", generate_episode, world,
                         config.episode_seed, config.n_subtasks,
                         scene_path=config.scene)
    note(f"episode ready: {len(episode.subtasks)} subtasks")

    ex: ExploreResult = _stage("explore", explore, world, episode.start_pose,
                               config.explore_budget, camera,
                               config.map_resolution, config.map_stride)
    note(f"explored {ex.steps} steps, {len(ex.frames)} frames, "
         f"{ex.occmap.unknown_count()} unknown cells")

    mem_frames = ex.frames[::max(config.memory_frame_stride, 1)]
    memory, pool = _stage("reconstruct", reconstruct, mem_frames, camera,
                          config.memory_config(), seeds["memory"])
    memory.scene_ref = config.scene
    note(f"memory: {memory.count} gaussians, pool PSNR {pool.mean_psnr():.2f} dB")

    providers = make_providers(scene, seed=config.seed, noise=config.noise(),
                               dim=config.dim_2d)
    _stage("features", optimize_features, memory, mem_frames, camera,
           providers, FeatureOptConfig(iters=config.feature_iters),
           seeds["features"])
    memory.freeze()
    codebook = _stage("codebook", build_codebook, memory, config.k1, config.k2,
                      config.w_pos, int(seeds["codebook"].integers(2 ** 31)),
                      config.dim_2d)
    # association wants broad view coverage; aim for ~80 frames
    assoc_frames = ex.frames[::max(1, len(ex.frames) // 80)]
    _stage("associate", associate, codebook, memory, assoc_frames, camera,
           providers, config.assoc_stride)
    note(f"codebook: {len(codebook)} entries, "
         f"{len(codebook.associated_entries())} associated")
    return PipelineArtifacts(world=world, occmap=ex.occmap, frames=ex.frames,
                             memory=memory, pool_mean_psnr=pool.mean_psnr(),
                             codebook=codebook, providers=providers,
                             episode=episode, explore_steps=ex.steps,
                             final_pose=ex.pose)


def run_navigation(art: PipelineArtifacts, config: RunConfig,
                   out_dir: Path | None = None,
                   progress=None) -> list[SubtaskResult]:
    settings = config.nav_settings()
    seeds = stage_seeds(config.seed)
    decoy_rng = seeds["decoys"]
    results = []
    pose = art.final_pose
    for i, goal in enumerate(art.episode.subtasks):
        cb = art.codebook
        if config.decoys > 0:
            query = encode_goal(goal, art.providers)
            cb = make_decoy_codebook(art.codebook, query.embedding,
                                     goal.gt_position, decoy_rng, config.decoys)
        trace = TrajectoryTrace()
        result, pose = navigate_subtask(art.world, art.occmap, cb, goal,
                                        art.providers, pose, config.camera(),
                                        settings, trace)
        results.append(result)
        if out_dir is not None:
            trace.save(out_dir / f"traj_{i:03d}.jsonl")
        if progress:
            progress(f"subtask {i}: {goal.modality:8s} "
                     f"{'OK ' if result.success else 'FAIL'} steps={result.steps}")
    return results


def run_pipeline(config: RunConfig, do_localization: bool = True,
                 do_navigation: bool = True, progress=None) -> MetricsReport:
    out_dir = ensure_dir(config.out_dir) if config.out_dir else None
    art = build_artifacts(config, progress=progress)
    report = MetricsReport(seed=config.seed, scene=config.scene,
                           mean_pool_psnr=art.pool_mean_psnr,
                           n_gaussians=art.memory.count,
                           n_codebook_entries=len(art.codebook),
                           explore_steps=art.explore_steps)
    if do_localization:
        loc = _stage("localize", eval_localization, art.codebook,
                     art.episode.subtasks, art.providers,
                     config.localization_radius, config.top_k)
        report.localization_accuracy = loc.accuracy
        report.localization_by_modality = loc.by_modality
        if progress:
            progress(f"localization accuracy {loc.accuracy:.3f} {loc.by_modality}")
    if do_navigation:
        results = _stage("navigate", run_navigation, art, config, out_dir,
                         progress)
        report.fill_navigation(results)
    report.validate()
    if out_dir is not None:
        _stage("write-artifacts", _write_artifacts, art, config, report, out_dir)
    return report


def _write_artifacts(art: PipelineArtifacts, config: RunConfig,
                     report: MetricsReport, out_dir: Path) -> None:
    map_to_pgm(out_dir / "map.pgm", art.occmap.cells)
    art.memory.save(out_dir / "memory.gsm")
    art.codebook.save(out_dir / "codebook.gscb")
    if not config.episode:
        save_episode(art.episode, out_dir / "episode.json")
    (out_dir / "config.json").write_text(
        json.dumps(config.to_dict(), indent=2, sort_keys=True))
    report.save(out_dir / "metrics.json")


def save_frames(frames, pose_steps, path: Path) -> None:
    """Frame log as npz: rgb is exact uint8, depth float64, ids uint16."""
    rgb = np.stack([np.round(f.rgb * 255.0).astype(np.uint8) for f in frames])
    depth = np.stack([f.depth for f in frames])
    ids = np.stack([f.instance_ids.astype(np.uint16) for f in frames])
    poses = np.array([[f.pose.x, f.pose.y, f.pose.z, f.pose.yaw, f.pose.pitch]
                      for f in frames])
    np.savez_compressed(path, rgb=rgb, depth=depth, ids=ids, poses=poses,
                        meta=np.array([pose_steps]))


def load_frames(path) -> list:
    from .simulator import Observation
    data = np.load(path)
    frames = []
    for i in range(data["rgb"].shape[0]):
        p = data["poses"][i]
        frames.append(Observation(
            rgb=data["rgb"][i].astype(float) / 255.0,
            depth=data["depth"][i],
            instance_ids=data["ids"][i].astype(np.int32),
            pose=Pose(x=p[0], y=p[1], z=p[2], yaw=p[3], pitch=p[4])))
    return frames
