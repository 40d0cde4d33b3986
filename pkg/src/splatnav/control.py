"""Greedy descent controller over FMM distance fields.

Shared by exploration and goal navigation: plan a field with the target as
source, then repeatedly turn toward / step along a short lookahead carrot.
Collisions patch the map and trigger a replan. Every executed step renders
an observation and folds it into the map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .accel.kconst import CELL_OCCUPIED
from .camera import FORWARD_STEP, Camera, Pose
from .fmm import DistanceField, descend_path, fmm_distance, snap_to_traversable
from .mapping import OccupancyMap, integrate_depth
from .simulator import Action, Observation, World

TURN_DEADBAND_RAD = math.radians(16.0)
LOOKAHEAD_CELLS = 6
STALL_PATIENCE = 18
MAX_REPLANS = 8


def wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


@dataclass
class WalkResult:
    pose: Pose
    arrived: bool
    steps: int
    forward_meters: float
    collisions: int
    poses: list[Pose] = field(default_factory=list)


class StepRunner:
    """Executes actions against the world while keeping the map current."""

    def __init__(self, world: World, occmap: OccupancyMap, camera: Camera,
                 map_stride: int = 2, frame_sink=None, trace=None):
        self.world = world
        self.occmap = occmap
        self.camera = camera
        self.map_stride = map_stride
        self.frame_sink = frame_sink
        self.trace = trace
        self.steps = 0
        self.forward_meters = 0.0

    def do(self, pose: Pose, action: Action) -> tuple[Pose, bool, Observation]:
        new_pose, collided = self.world.step(pose, action)
        obs = self.world.render(new_pose, self.camera)
        integrate_depth(self.occmap, obs, self.camera, self.map_stride)
        self.steps += 1
        if action == Action.MOVE_FORWARD and not collided:
            self.forward_meters += FORWARD_STEP
        if self.frame_sink is not None:
            self.frame_sink.append(obs)
        if self.trace is not None:
            self.trace.record(action, new_pose, collided=collided)
        return new_pose, collided, obs


def _plan(occmap: OccupancyMap, target_cell) -> DistanceField | None:
    trav = occmap.traversable()
    src = snap_to_traversable(trav, target_cell, max_radius_cells=10)
    if src is None:
        return None
    return fmm_distance(trav, src, occmap.resolution)


def walk_to(runner: StepRunner, pose: Pose, target_cell: tuple[int, int],
            trigger_radius_m: float, max_steps: int) -> WalkResult:
    """Descend toward the target cell until within the trigger radius."""
    occmap = runner.occmap
    poses = [pose]
    steps0 = runner.steps
    fwd0 = runner.forward_meters
    collisions = 0
    replans = 0
    field_ = _plan(occmap, target_cell)
    tx, ty = occmap.cell_center(*target_cell)

    def dist_to_target(p: Pose) -> float:
        return math.hypot(p.x - tx, p.y - ty)

    best_geo = math.inf
    stall = 0
    while runner.steps - steps0 < max_steps:
        if dist_to_target(pose) <= trigger_radius_m:
            return WalkResult(pose, True, runner.steps - steps0,
                              runner.forward_meters - fwd0, collisions, poses)
        if field_ is None:
            break
        agent_cell = occmap.world_to_cell(pose.x, pose.y)
        trav = occmap.traversable()
        start = snap_to_traversable(trav, agent_cell, max_radius_cells=8)
        if start is None or not np.isfinite(field_.dist[start]):
            replans += 1
            if replans > MAX_REPLANS:
                break
            field_ = _plan(occmap, target_cell)
            if field_ is None or start is None or not np.isfinite(field_.dist[start]):
                break
        geo = float(field_.dist[start])
        if geo < best_geo - 1e-9:
            best_geo = geo
            stall = 0
        else:
            stall += 1
            if stall == STALL_PATIENCE:
                replans += 1
                if replans > MAX_REPLANS:
                    break
                field_ = _plan(occmap, target_cell)
                stall = 0
                if field_ is None:
                    break

        path = descend_path(field_, start, max_len=LOOKAHEAD_CELLS + 1)
        carrot = path[min(LOOKAHEAD_CELLS, len(path) - 1)]
        if carrot == tuple(start):
            cx, cy = tx, ty
        else:
            cx, cy = occmap.cell_center(*carrot)
        err = wrap_angle(math.atan2(cy - pose.y, cx - pose.x) - pose.yaw)
        action = (Action.MOVE_FORWARD if abs(err) <= TURN_DEADBAND_RAD
                  else (Action.TURN_LEFT if err > 0 else Action.TURN_RIGHT))
        pose, collided, _ = runner.do(pose, action)
        poses.append(pose)
        if collided:
            collisions += 1
            # stamp the blocked cell and replan around it
            bx = pose.x + (FORWARD_STEP * 0.8) * math.cos(pose.yaw)
            by = pose.y + (FORWARD_STEP * 0.8) * math.sin(pose.yaw)
            bi, bj = occmap.world_to_cell(bx, by)
            occmap.cells[bi, bj] = CELL_OCCUPIED
            occmap.version += 1
            replans += 1
            if replans > MAX_REPLANS:
                break
            field_ = _plan(occmap, target_cell)
    arrived = dist_to_target(pose) <= trigger_radius_m
    return WalkResult(pose, arrived, runner.steps - steps0,
                      runner.forward_meters - fwd0, collisions, poses)
