"""Two-level vector quantization of the memory and 2D-3D association.

Coarse clusters jointly quantize scaled positions and features; each coarse
cluster is refined on features alone. Every fine entry represents an
object-instance-like group of gaussians; association renders each entry's
silhouette and matches it against 2D instance masks by overlap, attaching a
score-weighted mean of the matched high-dimensional features.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import accel
from .camera import Camera
from .perception import OracleProviders
from .simulator import Observation
from .splat import GaussianMemory

log = logging.getLogger(__name__)

DEFAULT_K1 = 32
DEFAULT_K2 = 5
SILHOUETTE_ALPHA = 0.3
MIN_ASSOC_IOU = 0.15

_CB_MAGIC = b"GSCBK\x01"


def kmeans(points: np.ndarray, k: int, rng: np.random.Generator,
           iters: int = 50, tol: float = 1e-9):
    """Plain k-means with k-means++ seeding.

    Returns (centroids, labels, inertia_history); the history is recorded
    after each assignment step and is non-increasing. Empty clusters keep
    their previous centroid.
    """
    n = points.shape[0]
    k = min(k, n)
    if k == 0:
        return np.zeros((0, points.shape[1])), np.zeros(0, np.int64), []
    centroids = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = points[first]
    d2 = np.sum((points - centroids[0]) ** 2, axis=1)
    for c in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            centroids[c:] = points[first]
            break
        idx = int(rng.choice(n, p=d2 / total))
        centroids[c] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centroids[c]) ** 2, axis=1))

    labels = np.zeros(n, np.int64)
    history: list[float] = []
    for _ in range(iters):
        dists = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        labels = np.argmin(dists, axis=1)
        inertia = float(dists[np.arange(n), labels].sum())
        history.append(inertia)
        moved = 0.0
        for c in range(k):
            sel = labels == c
            if sel.any():
                new = points[sel].mean(axis=0)
                moved = max(moved, float(np.sum((new - centroids[c]) ** 2)))
                centroids[c] = new
        if moved <= tol:
            dists = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
            labels = np.argmin(dists, axis=1)
            history.append(float(dists[np.arange(n), labels].sum()))
            break
    return centroids, labels, history


@dataclass
class CodebookEntry:
    feature_centroid: np.ndarray            # (d,) low-dim feature center
    members: np.ndarray                     # (K,) gaussian indices
    centroid_3d: np.ndarray                 # (3,) mean member position
    instance_feature: np.ndarray | None = None  # (D,) unit norm, if observed


@dataclass
class Codebook:
    entries: list[CodebookEntry]
    k1: int
    k2: int
    dim_2d: int
    seed: int
    kmeans_history: list[list[float]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def associated_entries(self) -> list[int]:
        return [i for i, e in enumerate(self.entries) if e.instance_feature is not None]

    def entry_of_gaussian(self, n_gaussians: int) -> np.ndarray:
        out = np.full(n_gaussians, -1, np.int64)
        for i, e in enumerate(self.entries):
            out[e.members] = i
        return out

    # -- persistence ----------------------------------------------------------

    def save(self, path: str | Path) -> None:
        has_feat = np.array([e.instance_feature is not None for e in self.entries])
        counts = np.array([len(e.members) for e in self.entries], np.int64)
        d_low = len(self.entries[0].feature_centroid) if self.entries else 0
        meta = json.dumps({
            "entries": len(self.entries),
            "k1": self.k1, "k2": self.k2, "dim_2d": self.dim_2d,
            "feature_dim": d_low,
            "seed": self.seed, "schema": 1,
            "member_counts": counts.tolist(),
            "has_instance_feature": has_feat.astype(int).tolist(),
        }).encode()
        with open(path, "wb") as fh:
            fh.write(_CB_MAGIC)
            fh.write(struct.pack("<I", len(meta)))
            fh.write(meta)
            for e in self.entries:
                fh.write(np.ascontiguousarray(e.feature_centroid, np.float64).tobytes())
                fh.write(np.ascontiguousarray(e.centroid_3d, np.float64).tobytes())
                fh.write(np.ascontiguousarray(e.members, np.int64).tobytes())
                feat = (e.instance_feature if e.instance_feature is not None
                        else np.zeros(self.dim_2d))
                fh.write(np.ascontiguousarray(feat, np.float64).tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "Codebook":
        with open(path, "rb") as fh:
            if fh.read(len(_CB_MAGIC)) != _CB_MAGIC:
                raise ValueError(f"{path}: not a codebook file")
            (mlen,) = struct.unpack("<I", fh.read(4))
            meta = json.loads(fh.read(mlen))
            dim_2d = meta["dim_2d"]
            d_low = meta["feature_dim"]
            entries = []
            for i in range(meta["entries"]):
                fc = np.frombuffer(fh.read(8 * d_low), np.float64).copy()
                c3 = np.frombuffer(fh.read(8 * 3), np.float64).copy()
                members = np.frombuffer(fh.read(8 * meta["member_counts"][i]), np.int64).copy()
                feat = np.frombuffer(fh.read(8 * dim_2d), np.float64).copy()
                has = bool(meta["has_instance_feature"][i])
                entries.append(CodebookEntry(fc, members, c3,
                                             feat if has else None))
        return cls(entries=entries, k1=meta["k1"], k2=meta["k2"],
                   dim_2d=dim_2d, seed=meta["seed"])


def build_codebook(memory: GaussianMemory, k1: int = DEFAULT_K1,
                   k2: int = DEFAULT_K2, w_pos: float = 1.0,
                   seed: int = 0, dim_2d: int = 64) -> Codebook:
    """Coarse position+feature clustering refined by feature-only clustering."""
    n = memory.count
    if n == 0:
        raise ValueError("cannot build a codebook from an empty memory")
    if n < k1:
        log.warning("only %d gaussians for k1=%d coarse clusters; reducing", n, k1)
        k1 = n
    rng = np.random.default_rng(seed)
    pos = memory.mu
    center = pos.mean(axis=0)
    diag = float(np.linalg.norm(pos.max(axis=0) - pos.min(axis=0)))
    diag = diag if diag > 0 else 1.0
    coarse_x = np.concatenate([w_pos * (pos - center) / diag, memory.feature], axis=1)
    _, coarse_labels, hist = kmeans(coarse_x, k1, rng)
    histories = [hist]

    entries: list[CodebookEntry] = []
    for c in range(k1):
        idx = np.nonzero(coarse_labels == c)[0]
        if len(idx) == 0:
            continue
        kf = min(k2, len(idx))
        _, fine_labels, fh = kmeans(memory.feature[idx], kf, rng)
        histories.append(fh)
        for f in range(kf):
            members = idx[fine_labels == f]
            if len(members) == 0:
                continue
            entries.append(CodebookEntry(
                feature_centroid=memory.feature[members].mean(axis=0),
                members=np.sort(members),
                centroid_3d=memory.mu[members].mean(axis=0)))
    return Codebook(entries=entries, k1=k1, k2=k2, dim_2d=dim_2d, seed=seed,
                    kmeans_history=histories)


def associate(codebook: Codebook, memory: GaussianMemory,
              frames: list[Observation], camera: Camera,
              providers: OracleProviders, frame_stride: int = 3,
              min_iou: float = MIN_ASSOC_IOU,
              silhouette_alpha: float = SILHOUETTE_ALPHA) -> Codebook:
    """Attach 2D instance features to codebook entries by silhouette overlap.

    For every sampled frame, each entry's member gaussians are rendered to
    an alpha silhouette; the best-IoU mask (if above ``min_iou``)
    contributes its feature weighted by the overlap score. Entries never
    matched keep instance_feature unset.
    """
    n_entries = len(codebook.entries)
    entry_of = codebook.entry_of_gaussian(memory.count)
    accum = np.zeros((n_entries, codebook.dim_2d))
    weight = np.zeros(n_entries)
    for obs in frames[::max(frame_stride, 1)]:
        masks = providers.segment(obs)
        if not masks:
            continue
        alpha = accel.active.entry_alpha(
            memory.mu, memory.radius, memory.opacity, entry_of, n_entries,
            obs.pose.camera_rows(), obs.pose.position,
            camera.fx, camera.fy, camera.cx, camera.cy,
            camera.height, camera.width)
        sil = (alpha > silhouette_alpha).reshape(n_entries, -1)
        sil_sizes = sil.sum(axis=1)
        mask_px = np.stack([m.pixels.ravel() for m in masks])
        mask_sizes = mask_px.sum(axis=1)
        inter = sil.astype(np.float64) @ mask_px.T.astype(np.float64)
        union = sil_sizes[:, None] + mask_sizes[None, :] - inter
        with np.errstate(invalid="ignore", divide="ignore"):
            iou = np.where(union > 0, inter / union, 0.0)
        best = np.argmax(iou, axis=1)
        best_iou = iou[np.arange(n_entries), best]
        for e in range(n_entries):
            if sil_sizes[e] == 0 or best_iou[e] < min_iou:
                continue
            accum[e] += best_iou[e] * masks[best[e]].feature_2d
            weight[e] += best_iou[e]
    for e, entry in enumerate(codebook.entries):
        if weight[e] > 0:
            norm = np.linalg.norm(accum[e])
            if norm > 0:
                entry.instance_feature = accum[e] / norm
    return codebook
