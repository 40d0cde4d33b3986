import numpy as np
import pytest

from splatnav.camera import Camera, Pose
from splatnav.fixtures import four_room_scene, medium_scene, smoke_scene
from splatnav.simulator import World


@pytest.fixture(scope="session")
def smoke_world():
    return World(smoke_scene(), Camera.from_hfov(160, 120))


@pytest.fixture(scope="session")
def smoke_world_small():
    return World(smoke_scene(), Camera.from_hfov(80, 60))


@pytest.fixture(scope="session")
def medium_world():
    return World(medium_scene(), Camera.from_hfov(160, 120))


@pytest.fixture(scope="session")
def four_room():
    return four_room_scene()


@pytest.fixture()
def rng():
    return np.random.default_rng(0)


def make_random_memory(seed: int, n: int = 8, dim: int = 6):
    """Small random gaussian cloud in front of the origin-ish camera."""
    from splatnav.splat import GaussianMemory
    r = np.random.default_rng(seed)
    mem = GaussianMemory(feature_dim=dim)
    mu = np.column_stack([r.uniform(1.5, 3.0, n), r.uniform(-0.8, 0.8, n),
                          r.uniform(0.8, 1.8, n)])
    mem.add(mu, r.uniform(0.1, 0.9, (n, 3)), r.uniform(0.05, 0.2, n),
            r.uniform(0.3, 0.9, n), r.normal(0.0, 0.3, (n, dim)))
    return mem


@pytest.fixture()
def tiny_camera():
    return Camera.from_hfov(32, 24)


@pytest.fixture()
def origin_pose():
    return Pose(x=0.0, y=0.0, z=1.31, yaw=0.0, pitch=0.0)
