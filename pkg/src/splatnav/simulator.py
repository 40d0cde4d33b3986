"""Synthetic indoor world: discrete agent kinematics and raycast RGB-D.

Observations carry RGB in [0, 1] quantized to 8-bit levels (so file dumps
round-trip exactly), Euclidean-range depth with 0.0 as the invalid
sentinel, and a ground-truth instance id per pixel (0 = background).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import accel
from .camera import (
    CAMERA_HEIGHT,
    FORWARD_STEP,
    TURN_STEP_DEG,
    Camera,
    Pose,
)
from .scene import AMBIENT, BACKGROUND_COLOR, LIGHT_DIR, Scene

AGENT_RADIUS = 0.17
AGENT_HEIGHT = 1.41
MIN_DEPTH = 0.5
MAX_DEPTH = 5.0
INVALID_DEPTH = 0.0


class Action(str, Enum):
    MOVE_FORWARD = "MOVE_FORWARD"
    TURN_LEFT = "TURN_LEFT"
    TURN_RIGHT = "TURN_RIGHT"
    LOOK_UP = "LOOK_UP"
    LOOK_DOWN = "LOOK_DOWN"
    STOP = "STOP"


@dataclass
class Observation:
    rgb: np.ndarray           # (H, W, 3) float in [0, 1]
    depth: np.ndarray         # (H, W) meters, 0.0 = invalid
    instance_ids: np.ndarray  # (H, W) int32, 0 = background
    pose: Pose

    @property
    def valid_depth(self) -> np.ndarray:
        return self.depth > 0.0


@dataclass
class GoalImage:
    """Rendered goal crop plus its instance-id channel.

    The id channel is what the oracle image encoder consumes; a real
    encoder would look only at rgb.
    """
    rgb: np.ndarray
    instance_ids: np.ndarray
    source_pose: Pose
    instance_id: int


def _segment_clear_of_rect(p0x, p0y, p1x, p1y, rect, radius) -> bool:
    """True if the swept disc from p0 to p1 misses the rectangle."""
    x0, y0, x1, y1 = rect
    x0 -= radius
    y0 -= radius
    x1 += radius
    y1 += radius
    # segment-AABB slab test in 2D
    dx = p1x - p0x
    dy = p1y - p0y
    t0, t1 = 0.0, 1.0
    for o, d, mn, mx in ((p0x, dx, x0, x1), (p0y, dy, y0, y1)):
        if abs(d) < 1e-12:
            if o < mn or o > mx:
                return True
        else:
            ta = (mn - o) / d
            tb = (mx - o) / d
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
            if t0 > t1:
                return True
    return False


class World:
    """Immutable scene plus pure step/render operations."""

    def __init__(self, scene: Scene, camera: Camera | None = None):
        self.scene = scene
        self.camera = camera or Camera.from_hfov()
        self._coll = scene.collision_boxes(AGENT_HEIGHT)
        self._light = np.asarray(LIGHT_DIR, dtype=float)
        self._light = self._light / np.linalg.norm(self._light)
        self._background = np.asarray(BACKGROUND_COLOR, dtype=float)

    # -- kinematics ---------------------------------------------------------

    def position_free(self, x: float, y: float, radius: float = AGENT_RADIUS) -> bool:
        fx0, fy0, fx1, fy1 = self.scene.floor_extent
        if not (fx0 + radius <= x <= fx1 - radius and fy0 + radius <= y <= fy1 - radius):
            return False
        for rect in self._coll:
            if not _segment_clear_of_rect(x, y, x, y, rect, radius):
                return False
        return True

    def _move_blocked(self, pose: Pose, nx: float, ny: float) -> bool:
        fx0, fy0, fx1, fy1 = self.scene.floor_extent
        r = AGENT_RADIUS
        if not (fx0 + r <= nx <= fx1 - r and fy0 + r <= ny <= fy1 - r):
            return True
        for rect in self._coll:
            if not _segment_clear_of_rect(pose.x, pose.y, nx, ny, rect, r):
                return True
        return False

    def step(self, pose: Pose, action: Action) -> tuple[Pose, bool]:
        """Apply one discrete action; collisions leave the pose unchanged."""
        turn = math.radians(TURN_STEP_DEG)
        if action == Action.MOVE_FORWARD:
            nxt = pose.moved(FORWARD_STEP)
            if self._move_blocked(pose, nxt.x, nxt.y):
                return pose, True
            return nxt, False
        if action == Action.TURN_LEFT:
            return pose.turned(turn), False
        if action == Action.TURN_RIGHT:
            return pose.turned(-turn), False
        if action == Action.LOOK_UP:
            return pose.pitched(turn), False
        if action == Action.LOOK_DOWN:
            return pose.pitched(-turn), False
        if action == Action.STOP:
            return pose, False
        raise ValueError(f"unknown action {action!r}")

    # -- sensing ------------------------------------------------------------

    def render(self, pose: Pose, camera: Camera | None = None) -> Observation:
        cam = camera or self.camera
        boxes, colors, ids = self.scene.surfaces()
        rgb, rng, id_img = accel.active.raycast(
            boxes, colors, ids, pose.camera_rows(), pose.position,
            cam.fx, cam.fy, cam.cx, cam.cy, cam.height, cam.width,
            self._light, AMBIENT, self._background)
        rgb = np.round(np.clip(rgb, 0.0, 1.0) * 255.0) / 255.0
        depth = np.where((rng >= MIN_DEPTH) & (rng <= MAX_DEPTH), rng, INVALID_DEPTH)
        return Observation(rgb=rgb, depth=depth,
                           instance_ids=id_img.astype(np.int32), pose=pose)

    def check_success(self, pose: Pose, instance_id: int,
                      radius: float = 1.0) -> bool:
        """True when the agent is within ``radius`` of the instance box (2D)."""
        obj = self.scene.object_by_id(instance_id)
        b = obj.box
        dx = max(b[0] - pose.x, 0.0, pose.x - b[3])
        dy = max(b[1] - pose.y, 0.0, pose.y - b[4])
        return math.hypot(dx, dy) <= radius

    def distance_to_instance(self, x: float, y: float, instance_id: int) -> float:
        obj = self.scene.object_by_id(instance_id)
        b = obj.box
        dx = max(b[0] - x, 0.0, x - b[3])
        dy = max(b[1] - y, 0.0, y - b[4])
        return math.hypot(dx, dy)

    def make_goal_image(self, instance_id: int, rng: np.random.Generator,
                        min_fraction: float = 0.10, attempts: int = 200) -> GoalImage:
        """Render the instance from a sampled viewpoint 1-2.5 m away.

        The returned crop is a full camera frame in which the instance
        occupies at least ``min_fraction`` of the pixels. Raises if no
        sampled viewpoint ever sees the instance well enough.
        """
        obj = self.scene.object_by_id(instance_id)
        cx, cy = float(obj.centroid[0]), float(obj.centroid[1])
        for _ in range(attempts):
            ang = rng.uniform(0.0, 2.0 * math.pi)
            dist = rng.uniform(1.0, 2.5)
            px = cx + dist * math.cos(ang)
            py = cy + dist * math.sin(ang)
            if not self.position_free(px, py):
                continue
            yaw = math.atan2(cy - py, cx - px)
            look_h = float(obj.centroid[2])
            pitch = math.atan2(look_h - CAMERA_HEIGHT, dist)
            pitch = max(min(pitch, math.radians(60)), math.radians(-60))
            pose = Pose(x=px, y=py, yaw=yaw, pitch=pitch)
            obs = self.render(pose)
            frac = float(np.mean(obs.instance_ids == instance_id))
            if frac >= min_fraction:
                return GoalImage(rgb=obs.rgb, instance_ids=obs.instance_ids,
                                 source_pose=pose, instance_id=instance_id)
        raise RuntimeError(
            f"instance {instance_id} not visible at >={min_fraction:.0%} "
            f"of pixels from any sampled viewpoint")
