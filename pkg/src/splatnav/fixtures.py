"""Hand-authored reference scenes: smoke (1 room), medium (2), full (4).

The four-room layout is ~15x15 m with door-connected quadrants and 24
objects spread across 22 categories (two cabinets on purpose, so text
queries must disambiguate instances of one category).
"""

from __future__ import annotations

import numpy as np

from .scene import ObjectInstance, Scene

WALL_T = 0.15
WALL_H = 2.5


def _wall(x0, y0, x1, y1) -> list[float]:
    return [x0, y0, 0.0, x1, y1, WALL_H]


def _obj(oid, category, text, cx, cy, cz, ex, ey, ez, color) -> ObjectInstance:
    return ObjectInstance(id=oid, category=category, text=text,
                          centroid=np.array([cx, cy, cz], dtype=float),
                          extent=np.array([ex, ey, ez], dtype=float),
                          color=np.array(color, dtype=float))


def smoke_scene() -> Scene:
    """Single 5x4 room with three objects."""
    w = 5.0
    h = 4.0
    obstacles = np.array([
        _wall(0, 0, w, WALL_T),
        _wall(0, h - WALL_T, w, h),
        _wall(0, WALL_T, WALL_T, h - WALL_T),
        _wall(w - WALL_T, WALL_T, w, h - WALL_T),
    ])
    objects = [
        _obj(1, "sofa", "the red two-seat sofa", 4.1, 2.0, 0.4, 0.8, 1.6, 0.8,
             (0.8, 0.12, 0.12)),
        _obj(2, "table", "the square wooden table", 2.4, 0.8, 0.3, 0.9, 0.9, 0.6,
             (0.55, 0.36, 0.18)),
        _obj(3, "plant", "the potted plant in the corner", 0.7, 3.3, 0.55,
             0.5, 0.5, 1.1, (0.15, 0.55, 0.2)),
    ]
    return Scene(floor_extent=np.array([0.0, 0.0, w, h]),
                 rooms=np.array([[WALL_T, WALL_T, w - WALL_T, h - WALL_T]]),
                 obstacles=obstacles, objects=objects, name="smoke")


def medium_scene() -> Scene:
    """Two 5x6 rooms joined by a center door; eight objects."""
    w = 10.0
    h = 6.0
    px0, px1 = 4.925, 5.075
    obstacles = np.array([
        _wall(0, 0, w, WALL_T),
        _wall(0, h - WALL_T, w, h),
        _wall(0, WALL_T, WALL_T, h - WALL_T),
        _wall(w - WALL_T, WALL_T, w, h - WALL_T),
        _wall(px0, WALL_T, px1, 2.4),
        _wall(px0, 3.6, px1, h - WALL_T),
    ])
    objects = [
        _obj(1, "sofa", "the green corner sofa", 1.3, 0.9, 0.4, 1.8, 0.85, 0.8,
             (0.18, 0.5, 0.25)),
        _obj(2, "table", "the long dining table", 2.8, 4.9, 0.4, 1.6, 0.9, 0.8,
             (0.5, 0.33, 0.2)),
        _obj(3, "plant", "the tall rubber plant", 4.4, 0.7, 0.55, 0.5, 0.5, 1.1,
             (0.16, 0.56, 0.22)),
        _obj(4, "bed", "the blue double bed", 8.6, 1.4, 0.3, 2.0, 1.6, 0.6,
             (0.35, 0.5, 0.78)),
        _obj(5, "fridge", "the steel refrigerator", 0.7, 3.2, 0.9, 0.8, 0.8, 1.8,
             (0.74, 0.75, 0.78)),
        _obj(6, "cabinet", "the oak storage cabinet", 9.4, 4.0, 0.5, 0.55, 1.2, 1.0,
             (0.6, 0.45, 0.25)),
        _obj(7, "desk", "the office desk by the window", 6.6, 5.3, 0.4, 1.2, 0.6, 0.8,
             (0.3, 0.3, 0.5)),
        _obj(8, "chair", "the yellow desk chair", 6.6, 4.4, 0.45, 0.5, 0.5, 0.9,
             (0.72, 0.56, 0.2)),
    ]
    return Scene(floor_extent=np.array([0.0, 0.0, w, h]),
                 rooms=np.array([[WALL_T, WALL_T, px0, h - WALL_T],
                                 [px1, WALL_T, w - WALL_T, h - WALL_T]]),
                 obstacles=obstacles, objects=objects, name="medium")


def four_room_scene() -> Scene:
    """Four ~7.3x7.3 m rooms around a cross partition with four doors."""
    w = 15.0
    px0, px1 = 7.425, 7.575   # partition band
    d0, d1 = 3.2, 4.4         # south/west door span
    e0, e1 = 10.6, 11.8       # north/east door span
    obstacles = np.array([
        # perimeter
        _wall(0, 0, w, WALL_T),
        _wall(0, w - WALL_T, w, w),
        _wall(0, WALL_T, WALL_T, w - WALL_T),
        _wall(w - WALL_T, WALL_T, w, w - WALL_T),
        # vertical partition with two doors
        _wall(px0, WALL_T, px1, d0),
        _wall(px0, d1, px1, px0),
        _wall(px0, px1, px1, e0),
        _wall(px0, e1, px1, w - WALL_T),
        # horizontal partition with two doors
        _wall(WALL_T, px0, d0, px1),
        _wall(d1, px0, px0, px1),
        _wall(px1, px0, e0, px1),
        _wall(e1, px0, w - WALL_T, px1),
        # partition cross center
        _wall(px0, px0, px1, px1),
    ])
    objects = [
        # south-west: living room
        _obj(1, "sofa", "the dark red fabric sofa by the south wall",
             1.2, 1.0, 0.4, 1.8, 0.85, 0.8, (0.72, 0.14, 0.14)),
        _obj(2, "table", "the small coffee table near the sofa",
             3.5, 1.9, 0.25, 1.0, 0.6, 0.5, (0.55, 0.35, 0.18)),
        _obj(3, "tv_stand", "the black television stand",
             1.1, 3.6, 0.3, 1.4, 0.45, 0.6, (0.15, 0.15, 0.17)),
        _obj(4, "bookshelf", "the walnut bookshelf against the west wall",
             0.6, 5.8, 0.9, 0.8, 0.35, 1.8, (0.45, 0.3, 0.2)),
        _obj(5, "armchair", "the green reading armchair",
             5.9, 1.0, 0.4, 0.8, 0.8, 0.8, (0.2, 0.45, 0.3)),
        _obj(6, "plant", "the leafy floor plant in the living room corner",
             6.8, 6.6, 0.55, 0.5, 0.5, 1.1, (0.15, 0.55, 0.2)),
        # south-east: bedroom
        _obj(7, "bed", "the blue double bed",
             13.3, 1.6, 0.3, 2.0, 1.6, 0.6, (0.35, 0.5, 0.75)),
        _obj(8, "nightstand", "the small bedside nightstand",
             14.3, 3.3, 0.25, 0.5, 0.5, 0.5, (0.5, 0.38, 0.25)),
        _obj(9, "wardrobe", "the tall bedroom wardrobe",
             8.2, 1.0, 1.0, 1.0, 0.6, 2.0, (0.4, 0.28, 0.18)),
        _obj(10, "cabinet", "the low oak cabinet in the bedroom",
             12.6, 6.9, 0.5, 1.2, 0.5, 1.0, (0.6, 0.45, 0.25)),
        _obj(11, "desk", "the study desk with the dark blue top",
             9.4, 6.9, 0.4, 1.2, 0.6, 0.8, (0.3, 0.3, 0.5)),
        _obj(12, "chair", "the yellow wooden chair by the desk",
             9.4, 5.9, 0.45, 0.5, 0.5, 0.9, (0.7, 0.55, 0.2)),
        # north-west: kitchen / dining
        _obj(13, "fridge", "the tall steel refrigerator",
             0.7, 13.9, 0.9, 0.8, 0.8, 1.8, (0.75, 0.75, 0.78)),
        _obj(14, "oven", "the black kitchen oven",
             1.9, 14.4, 0.45, 0.7, 0.6, 0.9, (0.22, 0.22, 0.25)),
        _obj(15, "sink", "the white kitchen sink unit",
             3.3, 14.4, 0.5, 0.8, 0.55, 1.0, (0.8, 0.8, 0.85)),
        _obj(16, "cabinet", "the tall kitchen cabinet beside the partition",
             6.9, 13.5, 0.5, 0.5, 1.2, 1.0, (0.62, 0.47, 0.28)),
        _obj(17, "table", "the large dining table",
             3.6, 10.9, 0.4, 1.6, 1.0, 0.8, (0.5, 0.33, 0.2)),
        _obj(18, "bench", "the dining bench along the west wall",
             0.6, 9.0, 0.25, 0.5, 1.4, 0.5, (0.42, 0.3, 0.22)),
        # north-east: bathroom / utility
        _obj(19, "bathtub", "the white bathtub in the corner",
             13.9, 13.9, 0.3, 1.6, 0.75, 0.6, (0.85, 0.88, 0.9)),
        _obj(20, "toilet", "the toilet by the east wall",
             14.4, 12.3, 0.35, 0.5, 0.7, 0.7, (0.88, 0.88, 0.92)),
        _obj(21, "washer", "the front-loading washing machine",
             12.3, 14.3, 0.45, 0.7, 0.7, 0.9, (0.7, 0.72, 0.75)),
        _obj(22, "mirror", "the wall mirror near the bathroom door",
             7.75, 13.0, 1.2, 0.12, 0.8, 1.1, (0.6, 0.75, 0.85)),
        _obj(23, "lamp", "the yellow floor lamp by the partition corner",
             8.0, 8.0, 0.8, 0.4, 0.4, 1.6, (0.9, 0.8, 0.3)),
        _obj(24, "dresser", "the wide utility dresser",
             11.0, 14.35, 0.45, 1.2, 0.5, 0.9, (0.48, 0.34, 0.24)),
    ]
    rooms = np.array([
        [WALL_T, WALL_T, px0, px0],
        [px1, WALL_T, w - WALL_T, px0],
        [WALL_T, px1, px0, w - WALL_T],
        [px1, px1, w - WALL_T, w - WALL_T],
    ])
    return Scene(floor_extent=np.array([0.0, 0.0, w, w]), rooms=rooms,
                 obstacles=obstacles, objects=objects, name="four_rooms")


FIXTURES = {
    "smoke": smoke_scene,
    "medium": medium_scene,
    "four_rooms": four_room_scene,
}


def get_fixture(name: str) -> Scene:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; have {sorted(FIXTURES)}") from None
