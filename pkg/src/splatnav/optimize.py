"""Online memory construction: insertion, gradient descent, keyframe replay.

Each incoming frame densifies under-covered regions, runs a burst of
descent iterations on itself, then a second burst on frames resampled from
the pool with probability proportional to how poorly they currently render
(their PSNR gap). Gradients are normalized per parameter class by their
RMS so the configured learning rates act as step sizes; a divergence guard
halves the rates after five consecutive loss increases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .camera import Camera
from .losses import COVERAGE_EPS, UncoveredFrameError, geometry_loss, psnr
from .simulator import Observation
from .splat import FEATURE_DIM, GaussianMemory, RenderedFrame, render, render_backward

PSNR_GAP_EPS_DB = 0.1


@dataclass(frozen=True)
class MemoryConfig:
    p1: int = 30                    # iterations on the current frame
    p2: int = 60                    # iterations on resampled pool frames
    ssim_weight: float = 0.2
    depth_weight: float = 1.0
    feature_dim: int = FEATURE_DIM
    insert_stride: int = 4
    insert_radius_px: float = 2.2   # footprint of new gaussians, in pixels
    insert_opacity: float = 0.5
    alpha_cover: float = 0.5
    depth_error: float = 0.1
    lr_mu: float = 1e-3
    lr_color: float = 2e-2
    lr_radius: float = 1e-3
    lr_opacity: float = 5e-2
    grad_clip: float = 5.0          # per-parameter cap, in RMS units
    prune_opacity: float = 0.05
    refresh_every: int = 10
    refresh_scale: float = 0.25
    keyframe_scale: float = 0.5     # replay keyframes at reduced resolution
    feature_init_std: float = 0.1


def insertion_mask(obs: Observation, rendered: RenderedFrame | None,
                   cfg: MemoryConfig) -> np.ndarray:
    """Pixels that would seed a new gaussian (before stride subsampling)."""
    need = obs.valid_depth.copy()
    if rendered is not None:
        bad = (rendered.alpha < cfg.alpha_cover) | \
              (np.abs(rendered.depth - obs.depth) > cfg.depth_error)
        need &= bad
    return need


def insert_gaussians(memory: GaussianMemory, obs: Observation, camera: Camera,
                     rendered: RenderedFrame | None, cfg: MemoryConfig,
                     rng: np.random.Generator) -> int:
    """Back-project under-covered pixels into new gaussians; returns count."""
    need = insertion_mask(obs, rendered, cfg)
    s = cfg.insert_stride
    off = s // 2
    grid = np.zeros_like(need)
    grid[off::s, off::s] = True
    sel = need & grid
    n = int(sel.sum())
    if n == 0:
        return 0
    rays = camera.pixel_rays(obs.pose)[sel]
    depths = obs.depth[sel]
    pts = obs.pose.position[None, :] + depths[:, None] * rays
    radii = cfg.insert_radius_px * depths / camera.fx
    colors = obs.rgb[sel]
    feats = rng.normal(0.0, cfg.feature_init_std, (n, memory.feature_dim))
    memory.add(pts, colors, radii, np.full(n, cfg.insert_opacity), feats)
    return n


@dataclass
class _GdState:
    lr_scale: float = 1.0
    bad_streak: int = 0
    last_loss: float | None = None
    last_frame: int | None = None


def _gd_step(memory: GaussianMemory, obs: Observation, camera: Camera,
             cfg: MemoryConfig, state: _GdState) -> float:
    memory._check_mutable()
    frame = render(memory, obs.pose, camera)
    try:
        loss, d_color, d_depth = geometry_loss(
            frame.color, frame.depth, frame.alpha, obs.rgb, obs.depth,
            cfg.ssim_weight, cfg.depth_weight, want_grads=True)
    except UncoveredFrameError:
        return math.inf

    fid = id(obs)
    if state.last_loss is not None and state.last_frame == fid and loss > state.last_loss:
        state.bad_streak += 1
        if state.bad_streak >= 5:
            state.lr_scale *= 0.5
            state.bad_streak = 0
    else:
        state.bad_streak = 0
    state.last_loss = loss
    state.last_frame = fid

    d_mu, d_col, d_rad, d_opa, _ = render_backward(
        memory, obs.pose, camera, frame, d_color, d_depth, need_geom=True)

    for grad, param, lr in ((d_mu, memory.mu, cfg.lr_mu),
                            (d_col, memory.color, cfg.lr_color),
                            (d_rad, memory.radius, cfg.lr_radius),
                            (d_opa, memory.opacity, cfg.lr_opacity)):
        rms = float(np.sqrt(np.mean(grad * grad)))
        if rms < 1e-10:  # dead zone: don't normalize float noise into steps
            continue
        step = np.clip(grad / rms, -cfg.grad_clip, cfg.grad_clip)
        param -= (lr * state.lr_scale) * step
    memory.clamp_params()
    return loss


def optimize_step(memory: GaussianMemory, obs: Observation, camera: Camera,
                  iters: int, cfg: MemoryConfig | None = None,
                  state: _GdState | None = None) -> list[float]:
    """Run ``iters`` descent iterations on one frame.

    Returns the loss trace: one entry per iteration plus a final
    re-evaluation after the last update.
    """
    cfg = cfg or MemoryConfig()
    state = state or _GdState()
    history = []
    for _ in range(iters):
        history.append(_gd_step(memory, obs, camera, cfg, state))
    frame = render(memory, obs.pose, camera)
    history.append(geometry_loss(frame.color, frame.depth, frame.alpha,
                                 obs.rgb, obs.depth,
                                 cfg.ssim_weight, cfg.depth_weight))
    return history


class FramePool:
    """All historical frames plus their most recent render quality."""

    def __init__(self):
        self.frames: list[Observation] = []
        self.psnr_db: list[float] = []

    def __len__(self) -> int:
        return len(self.frames)

    def add(self, obs: Observation, psnr_value: float) -> None:
        self.frames.append(obs)
        self.psnr_db.append(float(psnr_value))

    def refresh(self, memory: GaussianMemory, camera: Camera,
                scale: float = 1.0) -> None:
        cam = camera if scale == 1.0 else camera.scaled(scale)
        factor = max(int(round(1.0 / scale)), 1) if scale != 1.0 else 1
        for i, obs in enumerate(self.frames):
            self.psnr_db[i] = frame_psnr(memory, obs, cam, factor)

    def mean_psnr(self) -> float:
        return float(np.mean(self.psnr_db)) if self.psnr_db else 0.0


def downsample(img: np.ndarray, factor: int) -> np.ndarray:
    """Block-mean downsample; trims to a multiple of ``factor``."""
    if factor == 1:
        return img
    h = (img.shape[0] // factor) * factor
    w = (img.shape[1] // factor) * factor
    img = img[:h, :w]
    shape = (h // factor, factor, w // factor, factor) + img.shape[2:]
    return img.reshape(shape).mean(axis=(1, 3))


def downsample_depth(depth: np.ndarray, factor: int) -> np.ndarray:
    """Valid-aware block mean: blocks without valid pixels stay invalid."""
    if factor == 1:
        return depth
    h = (depth.shape[0] // factor) * factor
    w = (depth.shape[1] // factor) * factor
    d = depth[:h, :w].reshape(h // factor, factor, w // factor, factor)
    valid = (d > 0).sum(axis=(1, 3))
    total = d.sum(axis=(1, 3))
    return np.where(valid > 0, total / np.maximum(valid, 1), 0.0)


def shrink_observation(obs: Observation, factor: int) -> Observation:
    return Observation(rgb=downsample(obs.rgb, factor),
                       depth=downsample_depth(obs.depth, factor),
                       instance_ids=obs.instance_ids[::factor, ::factor],
                       pose=obs.pose)


def frame_psnr(memory: GaussianMemory, obs: Observation, camera: Camera,
               factor: int = 1) -> float:
    """Render quality of one pool frame at the given downsample factor."""
    if memory.count == 0:
        return 0.0
    frame = render(memory, obs.pose, camera)
    target = downsample(obs.rgb, factor)
    target = target[:camera.height, :camera.width]
    mask = frame.alpha > COVERAGE_EPS
    try:
        return psnr(frame.color, target, mask)
    except UncoveredFrameError:
        return 0.0


def keyframe_probabilities(psnr_db: list[float],
                           eps_db: float = PSNR_GAP_EPS_DB) -> np.ndarray:
    """Sampling weights proportional to max(maxPSNR - PSNR_i, eps)."""
    arr = np.asarray(psnr_db, dtype=float)
    gaps = np.maximum(arr.max() - arr, eps_db)
    return gaps / gaps.sum()


def sample_keyframe_index(pool: FramePool, rng: np.random.Generator) -> int:
    if len(pool) == 0:
        raise ValueError("cannot sample from an empty pool")
    probs = keyframe_probabilities(pool.psnr_db)
    return int(rng.choice(len(pool), p=probs))


def sample_keyframe(pool: FramePool, rng: np.random.Generator) -> Observation:
    return pool.frames[sample_keyframe_index(pool, rng)]


def reconstruct(frames: list[Observation], camera: Camera,
                cfg: MemoryConfig | None = None,
                rng: np.random.Generator | None = None,
                progress=None) -> tuple[GaussianMemory, FramePool]:
    """Build a memory from an ordered frame log.

    Per frame: densify, optimize the frame itself (p1 iterations), then
    optimize resampled pool frames (p2 iterations total); pool render
    quality is refreshed at reduced resolution every ``refresh_every``
    frames and once more at full resolution at the end.
    """
    if not frames:
        raise ValueError("reconstruct requires a non-empty frame log")
    cfg = cfg or MemoryConfig()
    rng = rng or np.random.default_rng(0)
    memory = GaussianMemory(cfg.feature_dim)
    pool = FramePool()
    factor = max(int(round(1.0 / cfg.refresh_scale)), 1)
    small_cam = camera.scaled(cfg.refresh_scale)
    key_factor = max(int(round(1.0 / cfg.keyframe_scale)), 1)
    key_cam = camera.scaled(cfg.keyframe_scale)
    key_cache: dict[int, Observation] = {}

    for t, obs in enumerate(frames):
        rendered = render(memory, obs.pose, camera) if memory.count else None
        insert_gaussians(memory, obs, camera, rendered, cfg, rng)
        state = _GdState()
        for _ in range(cfg.p1):
            _gd_step(memory, obs, camera, cfg, state)
        if cfg.p2 > 0 and len(pool) > 0:
            state = _GdState()
            for _ in range(cfg.p2):
                idx = sample_keyframe_index(pool, rng)
                if idx not in key_cache:
                    key_cache[idx] = shrink_observation(pool.frames[idx],
                                                        key_factor)
                _gd_step(memory, key_cache[idx], key_cam, cfg, state)
        if memory.count:
            memory.keep(memory.opacity >= cfg.prune_opacity)
        pool.add(obs, frame_psnr(memory, obs, small_cam, factor))
        if (t + 1) % cfg.refresh_every == 0:
            pool.refresh(memory, camera, cfg.refresh_scale)
        if progress is not None:
            progress(t, len(frames), memory.count)
    pool.refresh(memory, camera, 1.0)
    return memory, pool


def overfit_frame(obs: Observation, camera: Camera,
                  iters: int = 300, cfg: MemoryConfig | None = None,
                  rng: np.random.Generator | None = None,
                  reinsert_every: int = 50) -> tuple[GaussianMemory, list[float]]:
    """Fit a memory to a single frame; returns (memory, psnr trace)."""
    cfg = cfg or MemoryConfig()
    rng = rng or np.random.default_rng(0)
    memory = GaussianMemory(cfg.feature_dim)
    state = _GdState()
    trace = []
    for it in range(iters):
        if it % reinsert_every == 0:
            rendered = render(memory, obs.pose, camera) if memory.count else None
            insert_gaussians(memory, obs, camera, rendered, cfg, rng)
        _gd_step(memory, obs, camera, cfg, state)
        if (it + 1) % 10 == 0 or it == iters - 1:
            trace.append(frame_psnr(memory, obs, camera))
    return memory, trace
