"""Scene description: axis-aligned rooms, wall boxes and object instances.

Scene files are JSON with the layout documented in the README (rooms[],
obstacles[], objects[], floor_extent). Loading validates all structural
invariants and raises SceneError with a field path on any violation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

WALL_COLOR = (0.82, 0.80, 0.76)
FLOOR_COLOR = (0.48, 0.46, 0.43)
BACKGROUND_COLOR = (0.09, 0.09, 0.11)
LIGHT_DIR = (0.32, 0.45, 0.83)  # unit-ish direction toward the light
AMBIENT = 0.3


class SceneError(ValueError):
    """Scene file failed to parse or violates a structural invariant."""

    def __init__(self, message: str, field_path: str | None = None):
        self.field_path = field_path
        if field_path:
            message = f"{field_path}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class ObjectInstance:
    id: int
    category: str
    text: str
    centroid: np.ndarray   # (3,) meters
    extent: np.ndarray     # (3,) meters, full side lengths
    color: np.ndarray      # (3,) rgb in [0, 1]

    @property
    def box(self) -> np.ndarray:
        """(6,) [xmin, ymin, zmin, xmax, ymax, zmax]."""
        half = self.extent / 2.0
        return np.concatenate([self.centroid - half, self.centroid + half])


@dataclass
class Scene:
    floor_extent: np.ndarray          # (4,) [xmin, ymin, xmax, ymax]
    rooms: np.ndarray                 # (R, 4) [xmin, ymin, xmax, ymax]
    obstacles: np.ndarray             # (B, 6) wall/divider boxes
    objects: list[ObjectInstance] = field(default_factory=list)
    name: str = "scene"

    _surfaces: tuple | None = field(default=None, repr=False, compare=False)

    def object_by_id(self, instance_id: int) -> ObjectInstance:
        for obj in self.objects:
            if obj.id == instance_id:
                return obj
        raise KeyError(f"unknown instance id {instance_id}")

    def room_of(self, x: float, y: float) -> int:
        """Index of the room containing (x, y), or -1."""
        for i, (x0, y0, x1, y1) in enumerate(self.rooms):
            if x0 <= x <= x1 and y0 <= y <= y1:
                return i
        return -1

    def surfaces(self):
        """Render arrays: (boxes (S,6), colors (S,3), ids (S,) int32).

        The floor slab renders with id 0, as do walls; only object boxes
        carry their instance ids.
        """
        if self._surfaces is None:
            fx0, fy0, fx1, fy1 = self.floor_extent
            floor = np.array([[fx0, fy0, -0.2, fx1, fy1, 0.0]])
            boxes = [floor]
            colors = [np.array([FLOOR_COLOR])]
            ids = [np.zeros(1, np.int32)]
            if len(self.obstacles):
                boxes.append(self.obstacles)
                colors.append(np.tile(np.array(WALL_COLOR), (len(self.obstacles), 1)))
                ids.append(np.zeros(len(self.obstacles), np.int32))
            if self.objects:
                boxes.append(np.stack([o.box for o in self.objects]))
                colors.append(np.stack([o.color for o in self.objects]))
                ids.append(np.array([o.id for o in self.objects], np.int32))
            self._surfaces = (np.ascontiguousarray(np.concatenate(boxes)),
                              np.ascontiguousarray(np.concatenate(colors)),
                              np.ascontiguousarray(np.concatenate(ids)))
        return self._surfaces

    def collision_boxes(self, agent_height: float = 1.41) -> np.ndarray:
        """(B, 4) 2D footprints [xmin, ymin, xmax, ymax] blocking the agent."""
        rects = []
        for box in self.obstacles:
            if box[5] > 0.0 and box[2] < agent_height:
                rects.append([box[0], box[1], box[3], box[4]])
        for obj in self.objects:
            b = obj.box
            if b[5] > 0.0 and b[2] < agent_height:
                rects.append([b[0], b[1], b[3], b[4]])
        return np.array(rects) if rects else np.zeros((0, 4))

    @property
    def diagonal(self) -> float:
        fx0, fy0, fx1, fy1 = self.floor_extent
        return float(np.hypot(fx1 - fx0, fy1 - fy0))


def _as_box(raw, path: str) -> np.ndarray:
    box = np.asarray(raw, dtype=float)
    if box.shape != (6,):
        raise SceneError("expected [xmin, ymin, zmin, xmax, ymax, zmax]", path)
    if not np.all(box[3:] > box[:3]):
        raise SceneError("box max must exceed min on every axis", path)
    return box


def validate_scene(scene: Scene) -> None:
    fx0, fy0, fx1, fy1 = scene.floor_extent
    if not (fx1 > fx0 and fy1 > fy0):
        raise SceneError("degenerate extent", "floor_extent")
    seen: set[int] = set()
    for i, obj in enumerate(scene.objects):
        path = f"objects[{i}]"
        if obj.id <= 0:
            raise SceneError("instance ids must be positive", path + ".id")
        if obj.id in seen:
            raise SceneError(f"duplicate instance id {obj.id}", path + ".id")
        seen.add(obj.id)
        if not obj.category:
            raise SceneError("category must be non-empty", path + ".category")
        if not np.all(obj.extent > 0):
            raise SceneError("extent must be strictly positive", path + ".extent")
        b = obj.box
        if b[0] < fx0 or b[1] < fy0 or b[3] > fx1 or b[4] > fy1:
            raise SceneError("object box outside floor extent", path + ".centroid")
        for j, wall in enumerate(scene.obstacles):
            overlap = np.all(b[:3] < wall[3:] - 1e-9) and np.all(b[3:] > wall[:3] + 1e-9)
            if overlap:
                raise SceneError(f"object overlaps obstacles[{j}]", path)


def load_scene(path: str | Path) -> Scene:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SceneError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: "
                         f"{exc.msg}") from exc
    return scene_from_dict(raw, name=path.stem)


def scene_from_dict(raw: dict, name: str = "scene") -> Scene:
    if not isinstance(raw, dict):
        raise SceneError("top level must be an object")
    for key in ("floor_extent", "rooms", "obstacles", "objects"):
        if key not in raw:
            raise SceneError("missing required field", key)
    floor = np.asarray(raw["floor_extent"], dtype=float)
    if floor.shape != (4,):
        raise SceneError("expected [xmin, ymin, xmax, ymax]", "floor_extent")
    rooms = np.asarray(raw["rooms"], dtype=float).reshape(-1, 4)
    obstacles = (np.stack([_as_box(b, f"obstacles[{i}]")
                           for i, b in enumerate(raw["obstacles"])])
                 if raw["obstacles"] else np.zeros((0, 6)))
    objects = []
    for i, o in enumerate(raw["objects"]):
        path = f"objects[{i}]"
        try:
            objects.append(ObjectInstance(
                id=int(o["id"]),
                category=str(o["category"]),
                text=str(o.get("text", "")),
                centroid=np.asarray(o["centroid"], dtype=float).reshape(3),
                extent=np.asarray(o["extent"], dtype=float).reshape(3),
                color=np.clip(np.asarray(o["color"], dtype=float).reshape(3), 0.0, 1.0),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneError(f"malformed object entry: {exc}", path) from exc
    scene = Scene(floor_extent=floor, rooms=rooms, obstacles=obstacles,
                  objects=objects, name=raw.get("name", name))
    validate_scene(scene)
    return scene


def scene_to_dict(scene: Scene) -> dict:
    return {
        "name": scene.name,
        "floor_extent": [float(v) for v in scene.floor_extent],
        "rooms": [[float(v) for v in r] for r in scene.rooms],
        "obstacles": [[float(v) for v in b] for b in scene.obstacles],
        "objects": [
            {
                "id": obj.id,
                "category": obj.category,
                "text": obj.text,
                "centroid": [float(v) for v in obj.centroid],
                "extent": [float(v) for v in obj.extent],
                "color": [float(v) for v in obj.color],
            }
            for obj in scene.objects
        ],
    }


def save_scene(scene: Scene, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2, sort_keys=True))
