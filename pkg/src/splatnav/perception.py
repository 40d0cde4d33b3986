"""Pluggable perception: oracle segmentation, encoders and matchers.

The oracle embedding space mimics a vision-language encoder: each category
gets a random unit direction, each instance sits at a small offset inside
its category cluster, and text descriptions land near their instance.
Noise knobs (feature jitter, mask dropout, spurious masks, verification
misses) degrade the oracles toward realistic perception.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .scene import Scene
from .simulator import GoalImage, Observation

DEFAULT_FEATURE_DIM_2D = 64
INSTANCE_OFFSET = 0.15
TEXT_JITTER = 0.05
TRUE_SCORE_MEAN = 1.2
TRUE_SCORE_STD = 0.05
FALSE_SCORE_MEAN = 0.7
FALSE_SCORE_STD = 0.1
MIN_MASK_PIXELS = 20


@dataclass(frozen=True)
class NoiseConfig:
    feature_jitter: float = 0.0
    mask_dropout: float = 0.0
    false_positive_rate: float = 0.0
    verify_false_negative: float = 0.0

    @classmethod
    def parse(cls, spec: str) -> "NoiseConfig":
        """Parse "oracle" or "oracle-noisy:<sigma>,<dropout>"."""
        if spec == "oracle":
            return cls()
        if spec.startswith("oracle-noisy:"):
            parts = spec.split(":", 1)[1].split(",")
            sigma = float(parts[0]) if parts[0] else 0.0
            dropout = float(parts[1]) if len(parts) > 1 and parts[1] else 0.0
            return cls(feature_jitter=sigma, mask_dropout=dropout)
        raise ValueError(f"unknown perception mode {spec!r}")


@dataclass
class InstanceMask:
    pixels: np.ndarray           # (H, W) bool
    feature_2d: np.ndarray       # (D,) unit norm
    instance_id_hint: int | None = None


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _hash_seed(*parts) -> int:
    h = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(h[:8], "little")


class FeatureSpace:
    """Deterministic synthetic embedding space over a scene's instances."""

    def __init__(self, scene: Scene, dim: int = DEFAULT_FEATURE_DIM_2D,
                 seed: int = 0, instance_offset: float = INSTANCE_OFFSET,
                 text_jitter: float = TEXT_JITTER):
        self.dim = dim
        self.seed = seed
        self.category_vec: dict[str, np.ndarray] = {}
        self.instance_vec: dict[int, np.ndarray] = {}
        self.text_vec: dict[str, np.ndarray] = {}
        rng_bg = np.random.default_rng(_hash_seed(seed, "background"))
        self.background_vec = _unit(rng_bg.normal(size=dim))
        for cat in sorted({o.category for o in scene.objects}):
            rng = np.random.default_rng(_hash_seed(seed, "cat", cat))
            self.category_vec[cat] = _unit(rng.normal(size=dim))
        for obj in scene.objects:
            rng = np.random.default_rng(_hash_seed(seed, "inst", obj.id))
            off = _unit(rng.normal(size=dim))
            self.instance_vec[obj.id] = _unit(
                self.category_vec[obj.category] + instance_offset * off)
            if obj.text:
                rng2 = np.random.default_rng(_hash_seed(seed, "text", obj.id))
                jit = _unit(rng2.normal(size=dim))
                self.text_vec[obj.text] = _unit(
                    self.instance_vec[obj.id] + text_jitter * jit)

    def encode_string(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("empty text payload")
        if text in self.text_vec:
            return self.text_vec[text].copy()
        if text in self.category_vec:
            return self.category_vec[text].copy()
        rng = np.random.default_rng(_hash_seed(self.seed, "oov", text))
        return _unit(rng.normal(size=self.dim))

    def instance_feature(self, instance_id: int) -> np.ndarray:
        return self.instance_vec[instance_id].copy()


class OracleProviders:
    """Ground-truth-backed segmenter/encoders/matcher with injected noise."""

    def __init__(self, scene: Scene, feature_space: FeatureSpace | None = None,
                 noise: NoiseConfig = NoiseConfig(), seed: int = 0,
                 min_mask_pixels: int = MIN_MASK_PIXELS):
        self.scene = scene
        self.space = feature_space or FeatureSpace(scene, seed=seed)
        self.noise = noise
        self.rng = np.random.default_rng(_hash_seed(seed, "providers"))
        self.min_mask_pixels = min_mask_pixels
        self._category_of = {o.id: o.category for o in scene.objects}

    @property
    def dim(self) -> int:
        return self.space.dim

    def _jitter(self, vec: np.ndarray, sigma: float | None = None) -> np.ndarray:
        sigma = self.noise.feature_jitter if sigma is None else sigma
        if sigma <= 0.0:
            return vec.copy()
        return _unit(vec + sigma * _unit(self.rng.normal(size=vec.shape[0])))

    def segment(self, obs: Observation) -> list[InstanceMask]:
        """One mask per sufficiently visible region, with noisy features.

        Background (walls/floor, id 0) is segmented too, like a
        segment-everything model would; its feature is a dedicated
        off-instance direction.
        """
        masks = []
        ids, counts = np.unique(obs.instance_ids, return_counts=True)
        for iid, count in zip(ids, counts):
            if count < self.min_mask_pixels:
                continue
            if iid > 0 and iid not in self.space.instance_vec:
                continue
            if self.noise.mask_dropout > 0.0 and self.rng.random() < self.noise.mask_dropout:
                continue
            vec = (self.space.background_vec if iid == 0
                   else self.space.instance_vec[int(iid)])
            masks.append(InstanceMask(
                pixels=obs.instance_ids == iid,
                feature_2d=self._jitter(vec),
                instance_id_hint=int(iid)))
        if self.noise.false_positive_rate > 0.0 and self.rng.random() < self.noise.false_positive_rate:
            h, w = obs.instance_ids.shape
            hh, ww = h // 4, w // 4
            i0 = int(self.rng.integers(0, h - hh))
            j0 = int(self.rng.integers(0, w - ww))
            blob = np.zeros((h, w), bool)
            blob[i0:i0 + hh, j0:j0 + ww] = True
            masks.append(InstanceMask(
                pixels=blob, feature_2d=_unit(self.rng.normal(size=self.dim)),
                instance_id_hint=None))
        return masks

    def encode_text(self, text: str) -> np.ndarray:
        return self.space.encode_string(text)

    def encode_image(self, goal_image: GoalImage) -> np.ndarray:
        ids = goal_image.instance_ids
        vals, counts = np.unique(ids[ids > 0], return_counts=True)
        if len(vals) == 0:
            raise ValueError("goal image contains no instance pixels")
        dominant = int(vals[np.argmax(counts)])
        return self._jitter(self.space.instance_vec[dominant])

    # -- verification oracles -------------------------------------------------

    def match_inliers(self, obs: Observation, goal_instance_id: int) -> float:
        """Keypoint-inlier stand-in: visible pixel fraction of the instance."""
        if self.noise.verify_false_negative > 0.0 and \
                self.rng.random() < self.noise.verify_false_negative:
            return 0.0
        return float(np.mean(obs.instance_ids == goal_instance_id))

    def propose_masks(self, obs: Observation, is_match) -> list[tuple[InstanceMask, float]]:
        """(mask, segmentation score) proposals for one verification view.

        ``is_match`` maps an instance id to ground truth goal membership;
        matching masks score around 1.2, others around 0.7; false-negative
        noise silently drops matching masks.
        """
        out = []
        ids, counts = np.unique(obs.instance_ids, return_counts=True)
        for iid, count in zip(ids, counts):
            if iid <= 0 or count < self.min_mask_pixels:
                continue
            if iid not in self.space.instance_vec:
                continue
            match = bool(is_match(int(iid)))
            if match and self.noise.verify_false_negative > 0.0 and \
                    self.rng.random() < self.noise.verify_false_negative:
                continue
            if match:
                score = TRUE_SCORE_MEAN + TRUE_SCORE_STD * self.rng.standard_normal()
            else:
                score = FALSE_SCORE_MEAN + FALSE_SCORE_STD * self.rng.standard_normal()
            out.append((InstanceMask(
                pixels=obs.instance_ids == iid,
                feature_2d=self._jitter(self.space.instance_vec[int(iid)]),
                instance_id_hint=int(iid)), float(score)))
        return out

    def category_of(self, instance_id: int) -> str | None:
        return self._category_of.get(instance_id)


def make_providers(scene: Scene, mode: str = "oracle", seed: int = 0,
                   noise: NoiseConfig | None = None,
                   dim: int = DEFAULT_FEATURE_DIM_2D) -> OracleProviders:
    cfg = noise if noise is not None else NoiseConfig.parse(mode)
    space = FeatureSpace(scene, dim=dim, seed=seed)
    return OracleProviders(scene, space, cfg, seed=seed)
