"""Navigation metrics: success rate and success weighted by path length."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .camera import Pose


@dataclass
class SubtaskResult:
    success: bool
    steps: int
    path_length: float        # executed forward distance, meters
    shortest_path: float      # geodesic start-to-goal distance, meters
    stop_pose: Pose
    modality: str = ""
    goal_instance_id: int = -1
    stopped: bool = True


def compute_spl(results: list[SubtaskResult]) -> float:
    """(1/N) sum_i S_i * l_i / max(p_i, l_i)."""
    if not results:
        return 0.0
    total = 0.0
    for r in results:
        if r.shortest_path <= 0.0:
            raise ValueError("shortest_path must be positive for SPL")
        if r.success:
            total += r.shortest_path / max(r.path_length, r.shortest_path)
    return total / len(results)


def success_rate(results: list[SubtaskResult]) -> float:
    if not results:
        return 0.0
    return float(np.mean([1.0 if r.success else 0.0 for r in results]))


def by_modality(results: list[SubtaskResult]):
    out: dict[str, list[SubtaskResult]] = {}
    for r in results:
        out.setdefault(r.modality or "unknown", []).append(r)
    return out


@dataclass
class MetricsReport:
    sr: float | None = None
    spl: float | None = None
    localization_accuracy: float | None = None
    localization_by_modality: dict = field(default_factory=dict)
    sr_by_modality: dict = field(default_factory=dict)
    spl_by_modality: dict = field(default_factory=dict)
    mean_pool_psnr: float | None = None
    n_subtasks: int = 0
    n_gaussians: int = 0
    n_codebook_entries: int = 0
    explore_steps: int = 0
    seed: int = 0
    scene: str = ""
    per_subtask: list = field(default_factory=list)

    @classmethod
    def from_navigation(cls, results: list[SubtaskResult], **kw) -> "MetricsReport":
        rep = cls(**kw)
        rep.fill_navigation(results)
        return rep

    def fill_navigation(self, results: list[SubtaskResult]) -> None:
        self.sr = success_rate(results)
        self.spl = compute_spl(results)
        self.n_subtasks = len(results)
        self.sr_by_modality = {m: success_rate(rs)
                               for m, rs in sorted(by_modality(results).items())}
        self.spl_by_modality = {m: compute_spl(rs)
                                for m, rs in sorted(by_modality(results).items())}
        self.per_subtask = [
            {
                "success": bool(r.success),
                "steps": int(r.steps),
                "path_length": round(float(r.path_length), 6),
                "shortest_path": round(float(r.shortest_path), 6),
                "modality": r.modality,
                "goal_instance_id": int(r.goal_instance_id),
                "stop_xy": [round(float(r.stop_pose.x), 6),
                            round(float(r.stop_pose.y), 6)],
            }
            for r in results
        ]

    def to_dict(self) -> dict:
        out = {}
        for key, val in self.__dict__.items():
            if val is None:
                continue
            out[key] = val
        return out

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    def validate(self) -> None:
        if self.sr is not None and self.spl is not None:
            assert self.spl <= self.sr + 1e-12, "SPL must not exceed SR"
