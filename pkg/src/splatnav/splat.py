"""Growable isotropic-gaussian scene memory and its differentiable render.

Each primitive carries position, rgb color, scalar radius, opacity and a
low-dimensional semantic feature vector. Storage is struct-of-arrays so the
kernels can run over contiguous float64 buffers.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import accel
from .camera import Camera, Pose

FEATURE_DIM = 6
OPACITY_MIN = 0.01
OPACITY_MAX = 0.995
RADIUS_MIN = 1e-4
RADIUS_MAX = 0.5

_CKPT_MAGIC = b"GSMEM\x01"


class EmptyMemoryError(RuntimeError):
    """Raised when rendering from a memory with no gaussians."""


class FrozenMemoryError(RuntimeError):
    """Raised on attempts to mutate geometry after freezing."""


@dataclass
class RenderedFrame:
    color: np.ndarray        # (H, W, 3) weight-normalized
    depth: np.ndarray        # (H, W) Euclidean range, weight-normalized
    feature: np.ndarray      # (H, W, d) or (H, W, 0) when not requested
    alpha: np.ndarray        # (H, W) accumulated opacity in [0, 1]
    # compositing internals consumed by the backward pass
    wsum: np.ndarray
    t_final: np.ndarray
    order: np.ndarray
    sat: np.ndarray

    @property
    def uncovered(self) -> np.ndarray:
        return self.alpha <= 0.0


class GaussianMemory:
    def __init__(self, feature_dim: int = FEATURE_DIM):
        self.feature_dim = feature_dim
        self.mu = np.zeros((0, 3))
        self.color = np.zeros((0, 3))
        self.radius = np.zeros(0)
        self.opacity = np.zeros(0)
        self.feature = np.zeros((0, feature_dim))
        self.frozen = False
        self.scene_ref = ""

    @property
    def count(self) -> int:
        return self.mu.shape[0]

    def _check_mutable(self):
        if self.frozen:
            raise FrozenMemoryError("geometry is frozen; queries only")

    def add(self, mu, color, radius, opacity, feature=None) -> None:
        self._check_mutable()
        mu = np.atleast_2d(np.asarray(mu, dtype=float))
        n = mu.shape[0]
        color = np.atleast_2d(np.asarray(color, dtype=float))
        radius = np.atleast_1d(np.asarray(radius, dtype=float))
        opacity = np.atleast_1d(np.asarray(opacity, dtype=float))
        if feature is None:
            feature = np.zeros((n, self.feature_dim))
        feature = np.atleast_2d(np.asarray(feature, dtype=float))
        if np.any(radius <= 0):
            raise ValueError("radius must be positive")
        if np.any((opacity < 0) | (opacity > 1)):
            raise ValueError("opacity must lie in [0, 1]")
        if feature.shape[1] != self.feature_dim:
            raise ValueError("feature dimension mismatch")
        self.mu = np.concatenate([self.mu, mu])
        self.color = np.concatenate([self.color, np.clip(color, 0.0, 1.0)])
        self.radius = np.concatenate([self.radius, radius])
        self.opacity = np.concatenate([self.opacity, opacity])
        self.feature = np.concatenate([self.feature, feature])

    def keep(self, keep_mask: np.ndarray) -> np.ndarray:
        """Drop gaussians outside the mask; returns surviving old indices."""
        self._check_mutable()
        idx = np.nonzero(keep_mask)[0]
        self.mu = self.mu[idx]
        self.color = self.color[idx]
        self.radius = self.radius[idx]
        self.opacity = self.opacity[idx]
        self.feature = self.feature[idx]
        return idx

    def clamp_params(self) -> None:
        np.clip(self.radius, RADIUS_MIN, RADIUS_MAX, out=self.radius)
        np.clip(self.opacity, OPACITY_MIN, OPACITY_MAX, out=self.opacity)
        np.clip(self.color, 0.0, 1.0, out=self.color)

    def freeze(self) -> None:
        self.frozen = True

    # -- persistence ----------------------------------------------------------

    def save(self, path: str | Path) -> None:
        meta = json.dumps({
            "count": self.count,
            "feature_dim": self.feature_dim,
            "scene_ref": self.scene_ref,
            "frozen": self.frozen,
            "schema": 1,
        }).encode()
        with open(path, "wb") as fh:
            fh.write(_CKPT_MAGIC)
            fh.write(struct.pack("<I", len(meta)))
            fh.write(meta)
            for arr in (self.mu, self.color, self.radius, self.opacity, self.feature):
                fh.write(np.ascontiguousarray(arr, dtype=np.float64).tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "GaussianMemory":
        with open(path, "rb") as fh:
            magic = fh.read(len(_CKPT_MAGIC))
            if magic != _CKPT_MAGIC:
                raise ValueError(f"{path}: not a gaussian memory checkpoint")
            (mlen,) = struct.unpack("<I", fh.read(4))
            meta = json.loads(fh.read(mlen))
            n = meta["count"]
            d = meta["feature_dim"]
            mem = cls(feature_dim=d)

            def read(shape):
                count = int(np.prod(shape))
                return np.frombuffer(fh.read(count * 8), dtype=np.float64).reshape(shape).copy()

            mem.mu = read((n, 3))
            mem.color = read((n, 3))
            mem.radius = read((n,))
            mem.opacity = read((n,))
            mem.feature = read((n, d))
            mem.scene_ref = meta.get("scene_ref", "")
            mem.frozen = bool(meta.get("frozen", False))
        return mem


def render(memory: GaussianMemory, pose: Pose, camera: Camera,
           with_features: bool = False) -> RenderedFrame:
    """Composite the memory into a frame from the given viewpoint."""
    if memory.count == 0:
        raise EmptyMemoryError("cannot render an empty memory")
    img_c, img_d, img_f, alpha, wsum, t_final, order, sat = accel.active.splat_forward(
        memory.mu, memory.color, memory.radius, memory.opacity, memory.feature,
        pose.camera_rows(), pose.position,
        camera.fx, camera.fy, camera.cx, camera.cy,
        camera.height, camera.width, with_features)
    return RenderedFrame(color=img_c, depth=img_d, feature=img_f, alpha=alpha,
                         wsum=wsum, t_final=t_final, order=order, sat=sat)


def render_backward(memory: GaussianMemory, pose: Pose, camera: Camera,
                    frame: RenderedFrame, d_color, d_depth, d_feature=None,
                    need_geom: bool = True):
    """Pull pixel-space loss gradients back onto gaussian parameters."""
    need_feature = d_feature is not None
    if d_feature is None:
        d_feature = np.zeros((camera.height, camera.width, 0))
    if d_color is None:
        d_color = np.zeros((camera.height, camera.width, 3))
    if d_depth is None:
        d_depth = np.zeros((camera.height, camera.width))
    return accel.active.splat_backward(
        memory.mu, memory.color, memory.radius, memory.opacity, memory.feature,
        pose.camera_rows(), pose.position,
        camera.fx, camera.fy, camera.cx, camera.cy,
        camera.height, camera.width,
        frame.order, frame.t_final, frame.wsum,
        frame.color, frame.depth, frame.feature, frame.sat,
        d_color, d_depth, d_feature, need_geom, need_feature)
