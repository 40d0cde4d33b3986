"""Memory-guided goal navigation.

The loop per subtask: encode the goal, rank codebook entries by cosine
similarity, walk to each candidate's waypoint, verify with a panoramic
scan, and on confirmation back-project the matched mask into a final
goalpoint before stopping. Exhausted candidates fall back to frontier
exploration with periodic verification.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .camera import Camera, Pose
from .codebook import Codebook, CodebookEntry
from .control import StepRunner, walk_to
from .episodes import Goal
from .fmm import fmm_distance, snap_to_traversable
from .mapping import OccupancyMap, detect_frontiers, select_frontier
from .metrics import SubtaskResult
from .perception import OracleProviders
from .simulator import Action, GoalImage, Observation, World

TOP_K = 5
WAYPOINT_TRIGGER_M = 1.2
GOALPOINT_TRIGGER_M = 1.0
WAYPOINT_DILATE_M = 0.5
PANORAMA_TURNS = 12
FALLBACK_VERIFY_EVERY = 12


@dataclass(frozen=True)
class VerifyThresholds:
    seg_score: float = 1.1
    feat_cosine: float = 0.23
    match_ratio: float = 0.05


class CandidateStatus(str, Enum):
    PENDING = "PENDING"
    VISITED_INVALID = "VISITED_INVALID"
    CONFIRMED = "CONFIRMED"


@dataclass
class Candidate:
    entry_index: int
    similarity: float
    waypoint: tuple[int, int] | None = None
    status: CandidateStatus = CandidateStatus.PENDING


@dataclass
class Verdict:
    found: bool
    mask: np.ndarray | None = None
    score_seg: float | None = None
    score_feat: float | None = None
    score_match: float | None = None
    view_obs: Observation | None = None


@dataclass
class GoalQuery:
    modality: str
    embedding: np.ndarray


class WaypointUnreachableError(RuntimeError):
    pass


class MaskDepthError(RuntimeError):
    pass


class TrajectoryTrace:
    """Structured per-step log: {step, action, pose, event} JSON lines."""

    def __init__(self):
        self.lines: list[dict] = []
        self.step = 0

    def record(self, action: Action, pose: Pose, collided: bool = False,
               event: str | None = None) -> None:
        self.step += 1
        self.lines.append({
            "step": self.step,
            "action": str(action.value),
            "pose": [round(pose.x, 4), round(pose.y, 4), round(pose.yaw, 4)],
            "collided": bool(collided),
            "event": event,
        })

    def event(self, name: str, **extra) -> None:
        self.lines.append({"step": self.step, "event": name, **extra})

    def events(self, name: str) -> list[dict]:
        return [l for l in self.lines if l.get("event") == name]

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for line in self.lines:
                fh.write(json.dumps(line, sort_keys=True) + "\n")


def encode_goal(goal: Goal, providers: OracleProviders) -> GoalQuery:
    """Project a goal of any modality into the shared embedding space."""
    if goal.modality in ("category", "text"):
        if not goal.payload:
            raise ValueError("empty goal payload")
        vec = providers.encode_text(goal.payload)
    elif goal.modality == "image":
        if not isinstance(goal.payload, GoalImage):
            raise ValueError("image goal without an image payload")
        vec = providers.encode_image(goal.payload)
    else:
        raise ValueError(f"unknown modality {goal.modality!r}")
    return GoalQuery(modality=goal.modality, embedding=vec / np.linalg.norm(vec))


def query_memory(codebook: Codebook, query: GoalQuery,
                 top_k: int = TOP_K) -> list[Candidate]:
    """Entries ranked by cosine similarity; unassociated entries excluded."""
    scored = []
    q = query.embedding / np.linalg.norm(query.embedding)
    for i, entry in enumerate(codebook.entries):
        if entry.instance_feature is None:
            continue
        sim = float(np.dot(entry.instance_feature, q))
        scored.append((-sim, i))
    scored.sort()
    return [Candidate(entry_index=i, similarity=-negsim)
            for negsim, i in scored[:top_k]]


def candidate_waypoint(entry: CodebookEntry, occmap: OccupancyMap,
                       dilate_m: float = WAYPOINT_DILATE_M) -> tuple[int, int]:
    """Project the entry centroid to the nearest traversable cell."""
    ci, cj = occmap.world_to_cell(entry.centroid_3d[0], entry.centroid_3d[1])
    trav = occmap.traversable()
    max_r = max(int(round(2.0 * dilate_m / occmap.resolution)), 1)
    cell = snap_to_traversable(trav, (ci, cj), max_r)
    if cell is None:
        raise WaypointUnreachableError(
            f"no traversable cell within {2 * dilate_m:.2f} m of projection")
    return cell


def goalpoint_from_mask(obs: Observation, mask: np.ndarray,
                        occmap: OccupancyMap, camera: Camera) -> tuple[int, int]:
    """Back-project masked pixels and land on the nearest traversable cell."""
    if mask is None or not mask.any():
        raise MaskDepthError("empty verification mask")
    sel = mask & obs.valid_depth
    if not sel.any():
        raise MaskDepthError("all masked depths are invalid")
    rays = camera.pixel_rays(obs.pose)[sel]
    pts = obs.pose.position[None, :] + obs.depth[sel][:, None] * rays
    cx, cy = float(pts[:, 0].mean()), float(pts[:, 1].mean())
    ci, cj = occmap.world_to_cell(cx, cy)
    max_r = max(int(round(1.2 / occmap.resolution)), 1)
    cell = snap_to_traversable(occmap.traversable(), (ci, cj), max_r)
    if cell is None:
        raise MaskDepthError("no traversable cell near the projected goalpoint")
    return cell


def _check_view(obs: Observation, goal: Goal, query: GoalQuery,
                providers: OracleProviders, thresholds: VerifyThresholds) -> Verdict:
    if goal.modality == "image":
        ratio = providers.match_inliers(obs, goal.gt_instance_id)
        if ratio >= thresholds.match_ratio:
            return Verdict(found=True, mask=obs.instance_ids == goal.gt_instance_id,
                           score_match=ratio, view_obs=obs)
        return Verdict(found=False, score_match=ratio)

    if goal.modality == "category":
        def is_match(iid: int) -> bool:
            return providers.category_of(iid) == goal.payload
    else:
        def is_match(iid: int) -> bool:
            return iid == goal.gt_instance_id

    best = Verdict(found=False)
    for mask, score in providers.propose_masks(obs, is_match):
        cos = float(np.dot(mask.feature_2d, query.embedding))
        if score >= thresholds.seg_score or cos >= thresholds.feat_cosine:
            if not best.found or score > (best.score_seg or -math.inf):
                best = Verdict(found=True, mask=mask.pixels, score_seg=score,
                               score_feat=cos, view_obs=obs)
    return best


def verify_goal(runner: StepRunner, pose: Pose, goal: Goal, query: GoalQuery,
                providers: OracleProviders, thresholds: VerifyThresholds,
                max_steps: int) -> tuple[Pose, Verdict, int]:
    """Panoramic scan (up to 12 turns); early exit on a confirmed view."""
    steps0 = runner.steps
    obs = runner.world.render(pose, runner.camera)
    verdict = _check_view(obs, goal, query, providers, thresholds)
    if verdict.found:
        return pose, verdict, 0
    for _ in range(PANORAMA_TURNS):
        if runner.steps - steps0 >= max_steps:
            break
        pose, _, obs = runner.do(pose, Action.TURN_LEFT)
        verdict = _check_view(obs, goal, query, providers, thresholds)
        if verdict.found:
            break
    return pose, verdict, runner.steps - steps0


def shortest_path_length(occmap: OccupancyMap, start: Pose, goal: Goal) -> float:
    """Geodesic distance from the start to the goal's nearest traversable cell."""
    trav = occmap.traversable()
    src = snap_to_traversable(trav, occmap.world_to_cell(start.x, start.y), 10)
    gi, gj = occmap.world_to_cell(goal.gt_position[0], goal.gt_position[1])
    tgt = snap_to_traversable(trav, (gi, gj), 40)
    if src is None or tgt is None:
        return max(float(np.hypot(goal.gt_position[0] - start.x,
                                  goal.gt_position[1] - start.y)), occmap.resolution)
    field_ = fmm_distance(trav, src, occmap.resolution)
    d = float(field_.dist[tgt])
    if not np.isfinite(d):
        d = float(np.hypot(goal.gt_position[0] - start.x,
                           goal.gt_position[1] - start.y))
    return max(d, occmap.resolution)


@dataclass
class NavigationSettings:
    top_k: int = TOP_K
    step_limit: int = 200
    waypoint_trigger_m: float = WAYPOINT_TRIGGER_M
    goalpoint_trigger_m: float = GOALPOINT_TRIGGER_M
    thresholds: VerifyThresholds = field(default_factory=VerifyThresholds)
    verification: bool = True        # False: stop at the first waypoint
    map_stride: int = 2


def navigate_subtask(world: World, occmap: OccupancyMap, codebook: Codebook,
                     goal: Goal, providers: OracleProviders, start_pose: Pose,
                     camera: Camera | None = None,
                     settings: NavigationSettings | None = None,
                     trace: TrajectoryTrace | None = None
                     ) -> tuple[SubtaskResult, Pose]:
    """Run one goal to completion; returns (result, final pose)."""
    settings = settings or NavigationSettings()
    camera = camera or world.camera
    trace = trace if trace is not None else TrajectoryTrace()
    runner = StepRunner(world, occmap, camera, settings.map_stride, trace=trace)
    pose = start_pose
    limit = settings.step_limit
    shortest = shortest_path_length(occmap, start_pose, goal)

    query = encode_goal(goal, providers)
    candidates = query_memory(codebook, query, settings.top_k)
    stopped = False

    def remaining() -> int:
        return limit - runner.steps

    def finish(success_hint: bool) -> tuple[SubtaskResult, Pose]:
        success = (stopped and runner.steps <= limit
                   and world.check_success(pose, goal.gt_instance_id))
        result = SubtaskResult(
            success=bool(success), steps=min(runner.steps, limit),
            path_length=runner.forward_meters, shortest_path=shortest,
            stop_pose=pose, modality=goal.modality,
            goal_instance_id=goal.gt_instance_id, stopped=stopped)
        return result, pose

    def go_stop(goal_cell) -> bool:
        """Walk to the final goalpoint and STOP; True if STOP executed."""
        nonlocal pose, stopped
        res = walk_to(runner, pose, goal_cell, settings.goalpoint_trigger_m,
                      max_steps=remaining())
        pose = res.pose
        if remaining() <= 0 and not res.arrived:
            return False
        pose, _, _ = runner.do(pose, Action.STOP)
        trace.event("STOP")
        stopped = True
        return True

    for cand in candidates:
        if remaining() <= 0:
            break
        entry = codebook.entries[cand.entry_index]
        try:
            cand.waypoint = candidate_waypoint(entry, occmap)
        except WaypointUnreachableError:
            cand.status = CandidateStatus.VISITED_INVALID
            continue
        trace.event("WAYPOINT_SET", entry=cand.entry_index,
                    similarity=round(cand.similarity, 4),
                    cell=[int(cand.waypoint[0]), int(cand.waypoint[1])])
        res = walk_to(runner, pose, cand.waypoint,
                      settings.waypoint_trigger_m, max_steps=remaining())
        pose = res.pose
        if not res.arrived:
            cand.status = CandidateStatus.VISITED_INVALID
            continue
        if not settings.verification:
            # ablation: trust the first reached waypoint
            pose, _, _ = runner.do(pose, Action.STOP)
            trace.event("STOP")
            stopped = True
            return finish(True)
        pose, verdict, _ = verify_goal(runner, pose, goal, query, providers,
                                       settings.thresholds, max_steps=remaining())
        if verdict.found:
            trace.event("VERIFY_PASS", entry=cand.entry_index)
            cand.status = CandidateStatus.CONFIRMED
            try:
                gp = goalpoint_from_mask(verdict.view_obs, verdict.mask,
                                         occmap, camera)
            except MaskDepthError:
                cand.status = CandidateStatus.VISITED_INVALID
                trace.event("VERIFY_FAIL", entry=cand.entry_index,
                            reason="goalpoint")
                continue
            if go_stop(gp):
                return finish(True)
            return finish(False)
        trace.event("VERIFY_FAIL", entry=cand.entry_index)
        cand.status = CandidateStatus.VISITED_INVALID

    # candidates exhausted: frontier fallback with periodic verification
    while settings.verification and remaining() > 0:
        frontiers = detect_frontiers(occmap)
        target_cell = None
        if frontiers:
            sel = select_frontier(occmap, occmap.world_to_cell(pose.x, pose.y),
                                  frontiers)
            if sel is not None:
                target_cell = sel[1]
        if target_cell is not None:
            res = walk_to(runner, pose, target_cell, trigger_radius_m=0.4,
                          max_steps=min(FALLBACK_VERIFY_EVERY, remaining()))
            pose = res.pose
        else:
            for _ in range(min(FALLBACK_VERIFY_EVERY, remaining())):
                pose, _, _ = runner.do(pose, Action.TURN_LEFT)
        if remaining() <= 0:
            break
        pose, verdict, _ = verify_goal(runner, pose, goal, query, providers,
                                       settings.thresholds, max_steps=remaining())
        if verdict.found:
            trace.event("VERIFY_PASS", entry=-1)
            try:
                gp = goalpoint_from_mask(verdict.view_obs, verdict.mask,
                                         occmap, camera)
            except MaskDepthError:
                continue
            go_stop(gp)
            return finish(True)
    return finish(False)
