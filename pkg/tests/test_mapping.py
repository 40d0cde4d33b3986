import numpy as np
import pytest

from splatnav.accel.kconst import CELL_FREE, CELL_OCCUPIED, CELL_UNKNOWN
from splatnav.camera import Camera, Pose
from splatnav.explorer import explore
from splatnav.mapping import (
    Frontier,
    OccupancyMap,
    detect_frontiers,
    frontier_mask,
    integrate_depth,
    load_map,
    save_map,
    select_frontier,
)
from splatnav.simulator import Observation, World
from tests.test_simulator import corridor_scene


def grid_map(cells):
    cells = np.asarray(cells, np.uint8)
    return OccupancyMap(resolution=0.05, origin=np.zeros(2), cells=cells,
                        visits=np.zeros(cells.shape, np.int32))


@pytest.fixture(scope="module")
def corridor_world():
    return World(corridor_scene(), Camera.from_hfov(160, 120))


class TestIntegration:
    def test_wall_frame_carves_corridor_and_band(self, corridor_world):
        # east wall face 2m from the camera
        world = corridor_world
        pose = Pose(9.85, 2.0, yaw=0.0)
        obs = world.render(pose)
        occ = OccupancyMap.from_scene(world.scene)
        integrate_depth(occ, obs, world.camera)
        ai, aj = occ.world_to_cell(pose.x, pose.y)
        # straight-line cells toward the wall are free
        wi, wj = occ.world_to_cell(11.80, 2.0)
        ray_cells = occ.cells[ai, aj + 1:wj - 2]
        assert (ray_cells == CELL_FREE).all()
        # an occupied band appears around 2m ahead
        band = occ.cells[ai - 8:ai + 8, wj - 1:wj + 3]
        assert (band == CELL_OCCUPIED).sum() >= 8

    def test_invalid_frame_only_marks_agent_cell(self, corridor_world):
        world = corridor_world
        pose = Pose(2.0, 2.0, yaw=0.0)
        obs = world.render(pose)
        invalid = Observation(rgb=obs.rgb, depth=np.zeros_like(obs.depth),
                              instance_ids=obs.instance_ids, pose=pose)
        occ = OccupancyMap.from_scene(world.scene)
        integrate_depth(occ, invalid, world.camera)
        ai, aj = occ.world_to_cell(pose.x, pose.y)
        assert occ.cells[ai, aj] == CELL_FREE
        mask = occ.cells == CELL_FREE
        mask[ai, aj] = False
        assert not mask.any()

    def test_integration_idempotent(self, corridor_world):
        world = corridor_world
        obs = world.render(Pose(9.85, 2.0, yaw=0.0))
        occ1 = OccupancyMap.from_scene(world.scene)
        integrate_depth(occ1, obs, world.camera)
        once = occ1.cells.copy()
        integrate_depth(occ1, obs, world.camera)
        assert np.array_equal(occ1.cells, once)

    def test_unknown_count_monotone(self, corridor_world):
        world = corridor_world
        occ = OccupancyMap.from_scene(world.scene)
        pose = Pose(2.0, 2.0, yaw=0.0)
        prev = occ.unknown_count()
        for _ in range(6):
            pose, _ = world.step(pose, __import__("splatnav.simulator",
                                 fromlist=["Action"]).Action.TURN_LEFT)
            integrate_depth(occ, world.render(pose), world.camera)
            cur = occ.unknown_count()
            assert cur <= prev
            prev = cur

    def test_occupied_never_reverts(self, corridor_world):
        world = corridor_world
        occ = OccupancyMap.from_scene(world.scene)
        integrate_depth(occ, world.render(Pose(9.85, 2.0, yaw=0.0)), world.camera)
        occupied_before = occ.cells == CELL_OCCUPIED
        integrate_depth(occ, world.render(Pose(9.0, 2.0, yaw=0.5)), world.camera)
        assert (occ.cells[occupied_before] != CELL_UNKNOWN).all()
        assert (occ.cells[occupied_before] == CELL_OCCUPIED).all()


class TestFrontiers:
    def test_fully_explored_no_frontiers(self):
        occ = grid_map(np.full((20, 20), CELL_FREE))
        assert detect_frontiers(occ) == []

    def test_doorway_yields_one_frontier(self):
        cells = np.full((20, 30), CELL_UNKNOWN, np.uint8)
        cells[5:15, 5:15] = CELL_FREE                 # known room
        cells[5:15, 15] = CELL_OCCUPIED               # east wall...
        cells[9:12, 15] = CELL_FREE                   # ...with a doorway
        occ = grid_map(cells)
        frontiers = detect_frontiers(occ, min_cells=3)
        assert len(frontiers) == 1
        assert all(cells[i, j] == CELL_FREE for i, j in frontiers[0].cells)
        assert frontiers[0].centroid[1] == pytest.approx(15, abs=1.0)

    def test_small_components_filtered(self):
        cells = np.full((20, 20), CELL_OCCUPIED, np.uint8)
        cells[5:8, 5:8] = CELL_FREE
        cells[6, 8] = CELL_FREE
        cells[6, 9] = CELL_UNKNOWN  # 1-cell frontier
        occ = grid_map(cells)
        assert detect_frontiers(occ, min_cells=5) == []
        assert len(detect_frontiers(occ, min_cells=1)) == 1

    def test_frontier_cells_satisfy_predicate(self):
        rng = np.random.default_rng(0)
        cells = rng.choice([CELL_UNKNOWN, CELL_FREE, CELL_OCCUPIED],
                           size=(40, 40), p=[0.3, 0.5, 0.2]).astype(np.uint8)
        occ = grid_map(cells)
        mask = frontier_mask(occ)
        for f in detect_frontiers(occ, min_cells=1):
            for i, j in f.cells:
                assert mask[i, j]
                assert cells[i, j] == CELL_FREE
                neighbors = [cells[i + di, j + dj]
                             for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1))
                             if 0 <= i + di < 40 and 0 <= j + dj < 40]
                assert CELL_UNKNOWN in neighbors


def open_arena(size=60):
    """Free arena with unknown bands on the east and west edges."""
    cells = np.full((size, size), CELL_FREE, np.uint8)
    cells[:, :10] = CELL_UNKNOWN
    cells[:, -10:] = CELL_UNKNOWN
    return grid_map(cells)


class TestSelect:
    def test_nearer_frontier_wins(self):
        occ = open_arena()
        frontiers = detect_frontiers(occ)
        agent = (30, 15)  # nearer the west frontier
        sel = select_frontier(occ, agent, frontiers)
        assert sel is not None
        frontier, cell, dist = sel
        assert frontier.centroid[1] < 30

    def test_tie_broken_by_size(self):
        cells = np.full((21, 41), CELL_FREE, np.uint8)
        cells[:, :5] = CELL_UNKNOWN          # large west frontier
        cells[8:13, 36:] = CELL_UNKNOWN      # small east frontier
        cells[:8, 36:] = CELL_OCCUPIED
        cells[13:, 36:] = CELL_OCCUPIED
        occ = grid_map(cells)
        frontiers = detect_frontiers(occ)
        assert len(frontiers) == 2
        agent = (10, 20)  # equidistant from both frontier columns
        sel = select_frontier(occ, agent, frontiers)
        frontier, _, _ = sel
        assert frontier.size == max(f.size for f in frontiers)

    def test_unreachable_frontier_skipped(self):
        cells = np.full((30, 30), CELL_FREE, np.uint8)
        cells[:, 20] = CELL_OCCUPIED        # full wall
        cells[:, 25:] = CELL_UNKNOWN        # frontier behind the wall
        cells[:, :3] = CELL_UNKNOWN         # reachable frontier west
        occ = grid_map(cells)
        frontiers = detect_frontiers(occ)
        sel = select_frontier(occ, (15, 10), frontiers)
        assert sel is not None
        frontier, cell, _ = sel
        assert cell[1] < 20

    def test_all_unreachable_returns_none(self):
        cells = np.full((30, 30), CELL_FREE, np.uint8)
        cells[:, 20] = CELL_OCCUPIED
        cells[:, 25:] = CELL_UNKNOWN
        occ = grid_map(cells)
        frontiers = detect_frontiers(occ)
        assert select_frontier(occ, (15, 10), frontiers) is None

    def test_empty_frontier_list_raises(self):
        with pytest.raises(ValueError):
            select_frontier(open_arena(), (5, 5), [])


class TestExplore:
    def test_convex_room_coverage(self, smoke_world):
        res = explore(smoke_world, Pose(1.2, 2.0, 1.31), budget=250)
        reach = np.zeros(res.occmap.shape, bool)
        si, sj = res.occmap.world_to_cell(1.2, 2.0)
        stack = [(si, sj)]
        seen = {(si, sj)}
        while stack:
            i, j = stack.pop()
            x, y = res.occmap.cell_center(i, j)
            if not smoke_world.position_free(x, y, radius=0.05):
                continue
            reach[i, j] = True
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                nxt = (i + di, j + dj)
                if nxt not in seen and 0 <= nxt[0] < reach.shape[0] \
                        and 0 <= nxt[1] < reach.shape[1]:
                    seen.add(nxt)
                    stack.append(nxt)
        covered = (res.occmap.cells == CELL_FREE) & reach
        assert covered.sum() / reach.sum() >= 0.95

    def test_budget_zero_only_initial_observation(self, smoke_world):
        res = explore(smoke_world, Pose(1.2, 2.0, 1.31), budget=0)
        assert res.steps == 0
        assert len(res.frames) == 1

    def test_termination_within_budget(self, smoke_world):
        res = explore(smoke_world, Pose(1.2, 2.0, 1.31), budget=80)
        assert res.steps <= 80


class TestMapIO:
    def test_pgm_roundtrip(self, tmp_path, smoke_world):
        res = explore(smoke_world, Pose(1.2, 2.0, 1.31), budget=30)
        save_map(res.occmap, tmp_path / "m.pgm", tmp_path / "m.json")
        loaded = load_map(tmp_path / "m.pgm", tmp_path / "m.json")
        assert np.array_equal(loaded.cells, res.occmap.cells)
        assert loaded.resolution == res.occmap.resolution
        assert np.allclose(loaded.origin, res.occmap.origin)
