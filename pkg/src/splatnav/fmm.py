"""Geodesic distance fields on the occupancy grid (eikonal |grad T| = 1).

Solved by first-order upwind fast marching with a binary heap; see the
kernel backends for the marching loop itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import accel

UNREACHABLE = np.inf


@dataclass
class DistanceField:
    dist: np.ndarray          # (H, W) meters; +inf blocked/unreachable
    resolution: float
    source: tuple[int, int]

    def reachable(self, i: int, j: int) -> bool:
        return bool(np.isfinite(self.dist[i, j]))


def fmm_distance(traversable: np.ndarray, source: tuple[int, int],
                 resolution: float) -> DistanceField:
    si, sj = int(source[0]), int(source[1])
    h, w = traversable.shape
    if not (0 <= si < h and 0 <= sj < w) or not traversable[si, sj]:
        raise ValueError(f"source cell {source} is not traversable")
    dist = accel.active.fmm(np.ascontiguousarray(traversable, dtype=np.uint8),
                            si, sj, float(resolution))
    return DistanceField(dist=dist, resolution=float(resolution), source=(si, sj))


_NEIGHBORS8 = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def descend_path(field: DistanceField, start: tuple[int, int],
                 max_len: int = 10 ** 6) -> list[tuple[int, int]]:
    """Greedy strict-descent walk toward the field source.

    Returns the visited cells starting at ``start``; ends at the source or
    at a local minimum (which only happens on inconsistent fields).
    """
    d = field.dist
    h, w = d.shape
    i, j = int(start[0]), int(start[1])
    path = [(i, j)]
    if not np.isfinite(d[i, j]):
        return path
    while len(path) < max_len and d[i, j] > 0.0:
        best = d[i, j]
        bi, bj = i, j
        for di, dj in _NEIGHBORS8:
            ni, nj = i + di, j + dj
            if 0 <= ni < h and 0 <= nj < w and d[ni, nj] < best:
                best = d[ni, nj]
                bi, bj = ni, nj
        if (bi, bj) == (i, j):
            break
        i, j = bi, bj
        path.append((i, j))
    return path


def snap_to_traversable(traversable: np.ndarray, cell: tuple[int, int],
                        max_radius_cells: int) -> tuple[int, int] | None:
    """Nearest traversable cell to ``cell`` within a square search window."""
    i0, j0 = int(cell[0]), int(cell[1])
    h, w = traversable.shape
    if 0 <= i0 < h and 0 <= j0 < w and traversable[i0, j0]:
        return (i0, j0)
    best = None
    best_d2 = None
    for r in range(1, max_radius_cells + 1):
        for i in range(max(i0 - r, 0), min(i0 + r + 1, h)):
            for j in range(max(j0 - r, 0), min(j0 + r + 1, w)):
                if max(abs(i - i0), abs(j - j0)) != r or not traversable[i, j]:
                    continue
                d2 = (i - i0) ** 2 + (j - j0) ** 2
                if best is None or d2 < best_d2:
                    best = (i, j)
                    best_d2 = d2
        if best is not None and best_d2 <= r * r:
            break
    return best
