"""Semantic feature training on frozen geometry.

The per-frame objective pulls rendered feature pixels toward their mask
mean and pushes different masks' means apart with a hinge at the margin:

    sum_m mean_p ||f_p - fbar_m||^2
        + beta * sum_{m != n} max(0, margin - ||fbar_m - fbar_n||)^2
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import Camera
from .losses import COVERAGE_EPS
from .perception import InstanceMask, OracleProviders
from .simulator import Observation
from .splat import GaussianMemory, render, render_backward


@dataclass(frozen=True)
class FeatureOptConfig:
    iters: int = 500
    beta: float = 0.5
    margin: float = 1.0
    lr: float = 0.05
    grad_clip: float = 5.0
    min_mask_pixels: int = 5


def feature_loss(feat_img: np.ndarray, covered: np.ndarray,
                 masks: list[InstanceMask], beta: float, margin: float,
                 min_mask_pixels: int = 5, want_grads: bool = False):
    """Loss (and optionally d/d feat_img) of one rendered feature frame."""
    sels = []
    means = []
    for m in masks:
        sel = m.pixels & covered
        if int(sel.sum()) < min_mask_pixels:
            continue
        sels.append(sel)
        means.append(feat_img[sel].mean(axis=0))
    if not sels:
        if want_grads:
            return 0.0, np.zeros_like(feat_img), 0
        return 0.0, 0

    loss = 0.0
    grad = np.zeros_like(feat_img) if want_grads else None
    for sel, fbar in zip(sels, means):
        f = feat_img[sel]
        diff = f - fbar
        loss += float(np.mean(np.sum(diff * diff, axis=1)))
        if want_grads:
            grad[sel] += (2.0 / len(f)) * diff

    k = len(means)
    for a in range(k):
        for b in range(k):
            if a == b:
                continue
            delta = means[a] - means[b]
            dist = float(np.linalg.norm(delta))
            gap = margin - dist
            if gap <= 0.0 or dist <= 1e-12:
                continue
            loss += beta * gap * gap
            if want_grads:
                dmean_a = beta * 2.0 * gap * (-delta / dist)
                grad[sels[a]] += dmean_a / int(sels[a].sum())
    if want_grads:
        return loss, grad, k
    return loss, k


def optimize_features(memory: GaussianMemory, frames: list[Observation],
                      camera: Camera, providers: OracleProviders,
                      cfg: FeatureOptConfig | None = None,
                      rng: np.random.Generator | None = None) -> list[float]:
    """Descent on gaussian features only; returns the loss trace.

    Each iteration samples one frame, renders its feature map and steps the
    features with RMS-normalized gradients. Frames without any usable mask
    are skipped.
    """
    cfg = cfg or FeatureOptConfig()
    rng = rng or np.random.default_rng(0)
    mask_cache: dict[int, list[InstanceMask]] = {}

    def masks_for(idx: int) -> list[InstanceMask]:
        if idx not in mask_cache:
            mask_cache[idx] = providers.segment(frames[idx])
        return mask_cache[idx]

    usable = [i for i in range(len(frames)) if len(masks_for(i)) > 0]
    history: list[float] = []
    if not usable or memory.count == 0:
        return history

    lr_scale = 1.0
    bad = 0
    last = None
    for _ in range(cfg.iters):
        idx = int(rng.choice(usable))
        obs = frames[idx]
        frame = render(memory, obs.pose, camera, with_features=True)
        covered = frame.alpha > COVERAGE_EPS
        loss, d_feat, n_masks = feature_loss(
            frame.feature, covered, masks_for(idx), cfg.beta, cfg.margin,
            cfg.min_mask_pixels, want_grads=True)
        if n_masks == 0:
            continue
        history.append(loss)
        if last is not None and loss > last:
            bad += 1
            if bad >= 5:
                lr_scale *= 0.5
                bad = 0
        else:
            bad = 0
        last = loss
        _, _, _, _, d_fea = render_backward(
            memory, obs.pose, camera, frame, None, None, d_feature=d_feat,
            need_geom=False)
        rms = float(np.sqrt(np.mean(d_fea * d_fea)))
        if rms < 1e-10:
            continue
        step = np.clip(d_fea / rms, -cfg.grad_clip, cfg.grad_clip)
        memory.feature -= (cfg.lr * lr_scale) * step
    return history
