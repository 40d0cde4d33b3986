"""2D occupancy grid built from depth observations, plus frontier detection.

Cells hold UNKNOWN/FREE/OCCUPIED; hits between 0.1 m and the robot height
mark obstacles, rays carve free space, and OCCUPIED is sticky. Frontiers
are connected FREE regions touching UNKNOWN space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import accel
from .accel.kconst import CELL_FREE, CELL_OCCUPIED, CELL_UNKNOWN
from .camera import Camera
from .fmm import DistanceField, fmm_distance
from .simulator import AGENT_HEIGHT, AGENT_RADIUS, Observation
from .scene import Scene

DEFAULT_RESOLUTION = 0.05
MIN_OBSTACLE_HEIGHT = 0.1
MIN_FRONTIER_CELLS = 5


@dataclass
class OccupancyMap:
    resolution: float
    origin: np.ndarray              # world (x, y) of the corner of cell (0, 0)
    cells: np.ndarray               # (H, W) uint8
    visits: np.ndarray              # (H, W) int32
    version: int = 0
    _trav_cache: tuple | None = field(default=None, repr=False)

    @classmethod
    def from_scene(cls, scene: Scene, resolution: float = DEFAULT_RESOLUTION,
                   margin: float = 0.4) -> "OccupancyMap":
        x0, y0, x1, y1 = scene.floor_extent
        origin = np.array([x0 - margin, y0 - margin])
        w = int(np.ceil((x1 - x0 + 2 * margin) / resolution))
        h = int(np.ceil((y1 - y0 + 2 * margin) / resolution))
        return cls(resolution=resolution, origin=origin,
                   cells=np.full((h, w), CELL_UNKNOWN, np.uint8),
                   visits=np.zeros((h, w), np.int32))

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        j = int(np.floor((x - self.origin[0]) / self.resolution))
        i = int(np.floor((y - self.origin[1]) / self.resolution))
        h, w = self.cells.shape
        return min(max(i, 0), h - 1), min(max(j, 0), w - 1)

    def cell_center(self, i: int, j: int) -> tuple[float, float]:
        return (self.origin[0] + (j + 0.5) * self.resolution,
                self.origin[1] + (i + 0.5) * self.resolution)

    def traversable(self, radius: float = AGENT_RADIUS) -> np.ndarray:
        """FREE cells eroded by the agent radius."""
        key = (self.version, radius)
        if self._trav_cache is not None and self._trav_cache[0] == key:
            return self._trav_cache[1]
        free = self.cells == CELL_FREE
        dist = ndimage.distance_transform_edt(free) * self.resolution
        trav = dist > radius
        self._trav_cache = (key, trav)
        return trav

    def unknown_count(self) -> int:
        return int(np.sum(self.cells == CELL_UNKNOWN))


def save_map(occmap: OccupancyMap, pgm_path, meta_path) -> None:
    from .imageio import map_to_pgm
    map_to_pgm(pgm_path, occmap.cells)
    import json
    with open(meta_path, "w") as fh:
        json.dump({"resolution": occmap.resolution,
                   "origin": [float(occmap.origin[0]), float(occmap.origin[1])]},
                  fh, sort_keys=True)


def load_map(pgm_path, meta_path) -> OccupancyMap:
    import json

    from .imageio import read_pgm
    img = read_pgm(pgm_path)
    cells = np.full(img.shape, CELL_UNKNOWN, np.uint8)
    cells[img == 255] = CELL_FREE
    cells[img == 0] = CELL_OCCUPIED
    with open(meta_path) as fh:
        meta = json.load(fh)
    return OccupancyMap(resolution=meta["resolution"],
                        origin=np.asarray(meta["origin"], dtype=float),
                        cells=cells, visits=np.zeros(img.shape, np.int32))


def integrate_depth(occmap: OccupancyMap, obs: Observation, camera: Camera,
                    pixel_stride: int = 2,
                    min_height: float = MIN_OBSTACLE_HEIGHT,
                    max_height: float = AGENT_HEIGHT) -> OccupancyMap:
    """Fold one depth frame into the map (in place); agent cell ends FREE."""
    pose = obs.pose
    ai, aj = occmap.world_to_cell(pose.x, pose.y)
    accel.active.integrate_depth(
        occmap.cells, occmap.visits, obs.depth,
        pose.camera_rows(), pose.position,
        camera.fx, camera.fy, camera.cx, camera.cy,
        float(occmap.origin[0]), float(occmap.origin[1]), occmap.resolution,
        pixel_stride, min_height, max_height, ai, aj)
    occmap.cells[ai, aj] = CELL_FREE
    occmap.version += 1
    return occmap


@dataclass
class Frontier:
    cells: np.ndarray     # (K, 2) int cell coords
    centroid: np.ndarray  # (2,) float cell coords
    size: int

    @property
    def first_cell_index(self) -> int:
        return int(self.cells[0, 0]) * 10 ** 6 + int(self.cells[0, 1])


def frontier_mask(occmap: OccupancyMap) -> np.ndarray:
    """FREE cells 4-adjacent to at least one UNKNOWN cell."""
    cells = occmap.cells
    unknown = cells == CELL_UNKNOWN
    near_unknown = np.zeros_like(unknown)
    near_unknown[1:, :] |= unknown[:-1, :]
    near_unknown[:-1, :] |= unknown[1:, :]
    near_unknown[:, 1:] |= unknown[:, :-1]
    near_unknown[:, :-1] |= unknown[:, 1:]
    return (cells == CELL_FREE) & near_unknown


def detect_frontiers(occmap: OccupancyMap,
                     min_cells: int = MIN_FRONTIER_CELLS) -> list[Frontier]:
    mask = frontier_mask(occmap)
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), np.int32))
    frontiers = []
    for lab in range(1, n + 1):
        ij = np.argwhere(labels == lab)
        if len(ij) < min_cells:
            continue
        order = np.lexsort((ij[:, 1], ij[:, 0]))
        ij = ij[order]
        frontiers.append(Frontier(cells=ij, centroid=ij.mean(axis=0),
                                  size=len(ij)))
    return frontiers


def frontier_walk_target(occmap: OccupancyMap, frontier: Frontier,
                         window_m: float = 0.7) -> list[tuple[int, int]]:
    """Traversable cells near the frontier centroid, nearest first."""
    trav = occmap.traversable()
    h, w = trav.shape
    ci, cj = frontier.centroid
    r = max(int(round(window_m / occmap.resolution)), 1)
    i0, i1 = max(int(ci) - r, 0), min(int(ci) + r + 1, h)
    j0, j1 = max(int(cj) - r, 0), min(int(cj) + r + 1, w)
    cand = np.argwhere(trav[i0:i1, j0:j1])
    if len(cand) == 0:
        return []
    cand = cand + np.array([i0, j0])
    d2 = (cand[:, 0] - ci) ** 2 + (cand[:, 1] - cj) ** 2
    order = np.lexsort((cand[:, 1], cand[:, 0], d2))
    return [tuple(c) for c in cand[order]]


def select_frontier(occmap: OccupancyMap, agent_cell: tuple[int, int],
                    frontiers: list[Frontier],
                    field: DistanceField | None = None,
                    blocked_cells=None, block_radius: int = 5):
    """Pick the geodesically nearest frontier.

    Ties break toward larger size, then lowest first-cell index. Walk
    targets within ``block_radius`` (Chebyshev) of a blocked cell are
    skipped, which lets callers retire already-visited approach points.
    Returns (frontier, walk_cell, distance) or None when nothing is
    reachable — the exploration-complete signal.
    """
    if not frontiers:
        raise ValueError("select_frontier requires a non-empty frontier list")
    trav = occmap.traversable()
    if field is None:
        from .fmm import snap_to_traversable
        src = snap_to_traversable(trav, agent_cell, max_radius_cells=8)
        if src is None:
            return None
        field = fmm_distance(trav, src, occmap.resolution)
    blocked_cells = blocked_cells or []

    def is_blocked(cell) -> bool:
        return any(max(abs(cell[0] - bi), abs(cell[1] - bj)) <= block_radius
                   for bi, bj in blocked_cells)

    scored = []
    for f in frontiers:
        best = np.inf
        best_cell = None
        for cell in frontier_walk_target(occmap, f):
            if is_blocked(cell):
                continue
            d = field.dist[cell]
            if d < best:
                best = d
                best_cell = cell
        if best_cell is not None and np.isfinite(best):
            scored.append((best, -f.size, f.first_cell_index, f, best_cell))
    if not scored:
        return None
    scored.sort(key=lambda s: s[:3])
    best = scored[0]
    return best[3], best[4], float(best[0])
