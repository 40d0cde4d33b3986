"""Frontier-driven exploration that records every observation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .camera import Camera, Pose
from .control import StepRunner, walk_to
from .mapping import (
    DEFAULT_RESOLUTION,
    MIN_FRONTIER_CELLS,
    OccupancyMap,
    detect_frontiers,
    integrate_depth,
    select_frontier,
)
from .simulator import Action, Observation, World

DEFAULT_EXPLORE_BUDGET = 1500
_SPIN_STEPS = 12
_WALK_CHUNK = 60
_ARRIVE_RADIUS_M = 0.35


@dataclass
class ExploreResult:
    occmap: OccupancyMap
    frames: list[Observation]
    pose: Pose
    steps: int


def explore(world: World, start_pose: Pose, budget: int = DEFAULT_EXPLORE_BUDGET,
            camera: Camera | None = None,
            resolution: float = DEFAULT_RESOLUTION,
            map_stride: int = 2,
            min_frontier_cells: int = MIN_FRONTIER_CELLS) -> ExploreResult:
    """Visit frontiers until none remain or the step budget runs out.

    The initial observation plus one observation per executed action are
    all collected; a full spin runs at the start and on each frontier
    arrival so the frame log covers the surroundings.
    """
    camera = camera or world.camera
    occmap = OccupancyMap.from_scene(world.scene, resolution)
    frames: list[Observation] = []
    pose = start_pose

    obs = world.render(pose, camera)
    integrate_depth(occmap, obs, camera, map_stride)
    frames.append(obs)

    runner = StepRunner(world, occmap, camera, map_stride, frame_sink=frames)

    def spin(p: Pose) -> Pose:
        for _ in range(_SPIN_STEPS):
            if runner.steps >= budget:
                return p
            p, _, _ = runner.do(p, Action.TURN_LEFT)
        return p

    pose = spin(pose)
    blacklist: list[tuple[int, int]] = []

    while runner.steps < budget:
        frontiers = detect_frontiers(occmap, min_frontier_cells)
        if not frontiers:
            break
        agent_cell = occmap.world_to_cell(pose.x, pose.y)
        sel = select_frontier(occmap, agent_cell, frontiers,
                              blocked_cells=blacklist)
        if sel is None:
            break
        _, walk_cell, _ = sel
        remaining = budget - runner.steps
        res = walk_to(runner, pose, walk_cell,
                      trigger_radius_m=_ARRIVE_RADIUS_M,
                      max_steps=min(_WALK_CHUNK, remaining))
        pose = res.pose
        # one visit per target: whatever stays unknown around it after the
        # spin is unobservable from here and must not re-attract the walker
        blacklist.append((int(walk_cell[0]), int(walk_cell[1])))
        if res.arrived:
            pose = spin(pose)
    return ExploreResult(occmap=occmap, frames=frames, pose=pose,
                         steps=runner.steps)
