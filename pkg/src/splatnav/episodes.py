"""Episodes: ordered multi-modal goal sequences over one scene.

Generation balances the three goal modalities, maximizes category
diversity, and greedily orders goals so consecutive ones prefer different
rooms. Episode files are JSON; image goals reference PPM/PGM sidecars.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .camera import Pose
from .imageio import read_pgm16, read_ppm, write_pgm16, write_ppm
from .scene import Scene
from .simulator import GoalImage, World

STEP_LIMIT = 200
MODALITIES = ("category", "image", "text")


class EpisodeGenerationError(RuntimeError):
    pass


@dataclass
class Goal:
    modality: str
    payload: str | GoalImage
    gt_instance_id: int
    gt_position: np.ndarray

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise ValueError(f"unknown modality {self.modality!r}")
        if self.modality in ("category", "text") and not isinstance(self.payload, str):
            raise ValueError(f"{self.modality} goal payload must be a string")
        if self.modality == "image" and not isinstance(self.payload, GoalImage):
            raise ValueError("image goal payload must be a GoalImage")


@dataclass
class Episode:
    scene_path: str
    start_pose: Pose
    subtasks: list[Goal] = field(default_factory=list)
    step_limit: int = STEP_LIMIT
    seed: int | None = None


def _modality_quotas(n: int, rng: np.random.Generator) -> list[str]:
    base = n // 3
    counts = {m: base for m in MODALITIES}
    extra = list(MODALITIES)
    rng.shuffle(extra)
    for m in extra[: n - 3 * base]:
        counts[m] += 1
    out = []
    for m in MODALITIES:
        out.extend([m] * counts[m])
    rng.shuffle(out)
    return out


def _diverse_instances(scene: Scene, n: int, rng: np.random.Generator) -> list[int]:
    """Pick n instance ids, round-robin over categories for diversity."""
    by_cat: dict[str, list[int]] = {}
    for obj in scene.objects:
        by_cat.setdefault(obj.category, []).append(obj.id)
    cats = sorted(by_cat)
    rng.shuffle(cats)
    for c in cats:
        rng.shuffle(by_cat[c])
    chosen: list[int] = []
    while len(chosen) < n:
        progressed = False
        for c in cats:
            if by_cat[c]:
                chosen.append(by_cat[c].pop())
                progressed = True
                if len(chosen) == n:
                    break
        if not progressed:
            break
    return chosen


def _order_by_rooms(scene: Scene, ids: list[int], rng: np.random.Generator) -> list[int]:
    """Greedy order preferring a different room than the previous goal."""
    remaining = list(ids)
    rng.shuffle(remaining)
    out = [remaining.pop()]
    while remaining:
        prev = scene.object_by_id(out[-1]).centroid
        prev_room = scene.room_of(prev[0], prev[1])
        other = [i for i in remaining
                 if scene.room_of(*scene.object_by_id(i).centroid[:2]) != prev_room]
        pick = other[0] if other else remaining[0]
        remaining.remove(pick)
        out.append(pick)
    return out


def random_free_pose(world: World, rng: np.random.Generator,
                     attempts: int = 500) -> Pose:
    x0, y0, x1, y1 = world.scene.floor_extent
    for _ in range(attempts):
        x = rng.uniform(x0 + 0.5, x1 - 0.5)
        y = rng.uniform(y0 + 0.5, y1 - 0.5)
        if world.position_free(x, y, radius=0.25):
            yaw = math.radians(30.0 * int(rng.integers(0, 12)))
            return Pose(x=x, y=y, yaw=yaw)
    raise EpisodeGenerationError("could not sample a free start pose")


def generate_episode(world: World, seed: int, n_subtasks: int = 20,
                     scene_path: str = "") -> Episode:
    """Deterministic episode with balanced modalities and diverse goals."""
    scene = world.scene
    if len(scene.objects) < n_subtasks:
        raise EpisodeGenerationError(
            f"scene has {len(scene.objects)} instances; {n_subtasks} needed")
    rng = np.random.default_rng(seed)
    ids = _diverse_instances(scene, n_subtasks, rng)
    ids = _order_by_rooms(scene, ids, rng)
    modalities = _modality_quotas(n_subtasks, rng)

    # image goals need a viewpoint that sees the instance; swap infeasible ones
    image_ok: dict[int, GoalImage] = {}

    def feasible_image(iid: int) -> bool:
        if iid in image_ok:
            return True
        try:
            image_ok[iid] = world.make_goal_image(iid, rng)
            return True
        except RuntimeError:
            return False

    for i in range(n_subtasks):
        if modalities[i] != "image" or feasible_image(ids[i]):
            continue
        for j in range(n_subtasks):
            if modalities[j] != "image" and feasible_image(ids[j]):
                modalities[i], modalities[j] = modalities[j], modalities[i]
                break
        else:
            raise EpisodeGenerationError(
                f"no viewpoint renders instance {ids[i]} for an image goal")

    subtasks = []
    for iid, modality in zip(ids, modalities):
        obj = scene.object_by_id(iid)
        if modality == "category":
            payload: str | GoalImage = obj.category
        elif modality == "text":
            if not obj.text:
                modality = "category"
                payload = obj.category
            else:
                payload = obj.text
        else:
            payload = image_ok[iid]
        subtasks.append(Goal(modality=modality, payload=payload,
                             gt_instance_id=iid,
                             gt_position=obj.centroid.copy()))
    start = random_free_pose(world, rng)
    return Episode(scene_path=scene_path, start_pose=start,
                   subtasks=subtasks, seed=seed)


# -- persistence ---------------------------------------------------------------

def save_episode(episode: Episode, path: str | Path) -> None:
    path = Path(path)
    img_dir = path.with_suffix("")  # sidecar directory for image payloads
    entries = []
    for i, goal in enumerate(episode.subtasks):
        entry = {
            "modality": goal.modality,
            "gt_instance_id": goal.gt_instance_id,
            "gt_position": [float(v) for v in goal.gt_position],
        }
        if isinstance(goal.payload, GoalImage):
            img_dir.mkdir(parents=True, exist_ok=True)
            stem = f"goal_{i:03d}"
            write_ppm(img_dir / f"{stem}.ppm", goal.payload.rgb)
            write_pgm16(img_dir / f"{stem}_ids.pgm", goal.payload.instance_ids)
            sp = goal.payload.source_pose
            entry["payload_ref"] = f"{img_dir.name}/{stem}"
            entry["payload_pose"] = [sp.x, sp.y, sp.z, sp.yaw, sp.pitch]
        else:
            entry["payload"] = goal.payload
        entries.append(entry)
    doc = {
        "scene": episode.scene_path,
        "seed": episode.seed,
        "step_limit": episode.step_limit,
        "start_pose": [episode.start_pose.x, episode.start_pose.y,
                       episode.start_pose.z, episode.start_pose.yaw,
                       episode.start_pose.pitch],
        "subtasks": entries,
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True))


def load_episode(path: str | Path) -> Episode:
    path = Path(path)
    doc = json.loads(path.read_text())
    sp = doc["start_pose"]
    subtasks = []
    for entry in doc["subtasks"]:
        modality = entry["modality"]
        if modality == "image":
            ref = path.parent / entry["payload_ref"]
            rgb = read_ppm(str(ref) + ".ppm")
            ids = read_pgm16(str(ref) + "_ids.pgm").astype(np.int32)
            pp = entry["payload_pose"]
            payload: str | GoalImage = GoalImage(
                rgb=rgb, instance_ids=ids,
                source_pose=Pose(x=pp[0], y=pp[1], z=pp[2], yaw=pp[3], pitch=pp[4]),
                instance_id=entry["gt_instance_id"])
        else:
            payload = entry["payload"]
        subtasks.append(Goal(modality=modality, payload=payload,
                             gt_instance_id=entry["gt_instance_id"],
                             gt_position=np.asarray(entry["gt_position"])))
    return Episode(scene_path=doc["scene"],
                   start_pose=Pose(x=sp[0], y=sp[1], z=sp[2], yaw=sp[3], pitch=sp[4]),
                   subtasks=subtasks,
                   step_limit=doc.get("step_limit", STEP_LIMIT),
                   seed=doc.get("seed"))
