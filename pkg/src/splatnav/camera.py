"""Pinhole camera model and agent pose conventions.

World frame: x/y horizontal, z up. Yaw is measured from +x, counter-
clockwise; pitch > 0 looks up. Image rows grow downward. The camera basis
rows are (right, down, forward) so that a pixel ray is
forward + ((px+0.5-cx)/fx)*right + ((py+0.5-cy)/fy)*down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

CAMERA_HEIGHT = 1.31
DEFAULT_HFOV_DEG = 42.0
FORWARD_STEP = 0.25
TURN_STEP_DEG = 30.0
PITCH_LIMIT_DEG = 60.0


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    z: float = CAMERA_HEIGHT
    yaw: float = 0.0
    pitch: float = 0.0

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def forward(self) -> np.ndarray:
        cp = math.cos(self.pitch)
        return np.array([math.cos(self.yaw) * cp, math.sin(self.yaw) * cp,
                         math.sin(self.pitch)])

    def camera_rows(self) -> np.ndarray:
        """3x3 rows (right, down, forward) of the world-to-camera rotation."""
        cy, sy = math.cos(self.yaw), math.sin(self.yaw)
        cp, sp = math.cos(self.pitch), math.sin(self.pitch)
        right = np.array([sy, -cy, 0.0])
        up = np.array([-cy * sp, -sy * sp, cp])
        forward = np.array([cy * cp, sy * cp, sp])
        return np.stack([right, -up, forward])

    def moved(self, dist: float) -> "Pose":
        return replace(self, x=self.x + dist * math.cos(self.yaw),
                       y=self.y + dist * math.sin(self.yaw))

    def turned(self, delta_rad: float) -> "Pose":
        yaw = (self.yaw + delta_rad) % (2.0 * math.pi)
        return replace(self, yaw=yaw)

    def pitched(self, delta_rad: float) -> "Pose":
        lim = math.radians(PITCH_LIMIT_DEG)
        pitch = min(max(self.pitch + delta_rad, -lim), lim)
        return replace(self, pitch=pitch)


@dataclass(frozen=True)
class Camera:
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    hfov_deg: float = DEFAULT_HFOV_DEG

    @classmethod
    def from_hfov(cls, width: int = 160, height: int = 120,
                  hfov_deg: float = DEFAULT_HFOV_DEG) -> "Camera":
        fx = (width / 2.0) / math.tan(math.radians(hfov_deg) / 2.0)
        return cls(width=width, height=height, fx=fx, fy=fx,
                   cx=width / 2.0, cy=height / 2.0, hfov_deg=hfov_deg)

    def scaled(self, factor: float) -> "Camera":
        """Same field of view at factor times the resolution."""
        w = max(int(round(self.width * factor)), 1)
        h = max(int(round(self.height * factor)), 1)
        return Camera.from_hfov(w, h, self.hfov_deg)

    def pixel_rays(self, pose: Pose) -> np.ndarray:
        """(H, W, 3) unit ray directions in world coordinates."""
        rows = pose.camera_rows()
        xs = (np.arange(self.width) + 0.5 - self.cx) / self.fx
        ys = (np.arange(self.height) + 0.5 - self.cy) / self.fy
        dirs = (rows[2][None, None, :]
                + xs[None, :, None] * rows[0][None, None, :]
                + ys[:, None, None] * rows[1][None, None, :])
        return dirs / np.linalg.norm(dirs, axis=2, keepdims=True)
