"""The jitted backend and the pure-numpy fallback must agree numerically."""

import numpy as np
import pytest

from splatnav.accel import get_backend
from splatnav.camera import Camera, Pose

numba_impl = get_backend("numba")
numpy_impl = get_backend("numpy")

pytestmark = pytest.mark.skipif(numba_impl is None,
                                reason="numba backend unavailable")


def _splat_inputs(seed, n=40):
    rng = np.random.default_rng(seed)
    mu = np.column_stack([rng.uniform(1.0, 4.0, n), rng.uniform(-1.5, 1.5, n),
                          rng.uniform(0.5, 2.0, n)])
    return (mu, rng.uniform(0, 1, (n, 3)), rng.uniform(0.03, 0.3, n),
            rng.uniform(0.2, 0.95, n), rng.normal(0, 0.3, (n, 6)))


@pytest.fixture(scope="module")
def cam_pose():
    return Camera.from_hfov(48, 36), Pose(0, 0, 1.31, 0.2, -0.1)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_splat_forward_and_backward_agree(cam_pose, seed):
    cam, pose = cam_pose
    mu, color, radius, opacity, feat = _splat_inputs(seed)
    args = (mu, color, radius, opacity, feat, pose.camera_rows(),
            pose.position, cam.fx, cam.fy, cam.cx, cam.cy,
            cam.height, cam.width, True)
    fa = numba_impl.splat_forward(*args)
    fb = numpy_impl.splat_forward(*args)
    for a, b in zip(fa, fb):
        assert np.allclose(a, b, atol=1e-12, rtol=1e-12)

    rng = np.random.default_rng(seed + 100)
    d_c = rng.normal(0, 1e-3, (cam.height, cam.width, 3))
    d_d = rng.normal(0, 1e-3, (cam.height, cam.width))
    d_f = rng.normal(0, 1e-3, (cam.height, cam.width, 6))
    back_args = args[:13] + (fa[6], fa[5], fa[4], fa[0], fa[1], fa[2], fa[7],
                             d_c, d_d, d_f, True, True)
    ba = numba_impl.splat_backward(*back_args)
    bb = numpy_impl.splat_backward(*back_args)
    for a, b in zip(ba, bb):
        assert np.allclose(a, b, atol=1e-12, rtol=1e-9)


def test_entry_alpha_agrees(cam_pose):
    cam, pose = cam_pose
    mu, color, radius, opacity, feat = _splat_inputs(7)
    ids = np.random.default_rng(7).integers(-1, 5, len(mu)).astype(np.int64)
    args = (mu, radius, opacity, ids, 5, pose.camera_rows(), pose.position,
            cam.fx, cam.fy, cam.cx, cam.cy, cam.height, cam.width)
    a = numba_impl.entry_alpha(*args)
    b = numpy_impl.entry_alpha(*args)
    assert np.allclose(a, b, atol=1e-12)


def test_raycast_agrees(cam_pose):
    cam, pose = cam_pose
    rng = np.random.default_rng(3)
    boxes = []
    for _ in range(12):
        lo = np.array([rng.uniform(0.5, 5), rng.uniform(-3, 3), 0.0])
        hi = lo + rng.uniform(0.2, 1.5, 3)
        boxes.append(np.concatenate([lo, hi]))
    boxes = np.array(boxes)
    colors = rng.uniform(0, 1, (12, 3))
    ids = np.arange(1, 13, dtype=np.int32)
    light = np.array([0.32, 0.45, 0.83])
    light /= np.linalg.norm(light)
    args = (boxes, colors, ids, pose.camera_rows(), pose.position,
            cam.fx, cam.fy, cam.cx, cam.cy, cam.height, cam.width,
            light, 0.3, np.array([0.1, 0.1, 0.12]))
    ra = numba_impl.raycast(*args)
    rb = numpy_impl.raycast(*args)
    assert np.allclose(ra[0], rb[0], atol=1e-12)
    assert np.allclose(ra[1], rb[1], atol=1e-12)
    assert np.array_equal(ra[2], rb[2])


def test_integrate_depth_agrees(cam_pose):
    cam, pose = cam_pose
    rng = np.random.default_rng(9)
    depth = np.where(rng.random((cam.height, cam.width)) < 0.7,
                     rng.uniform(0.5, 5.0, (cam.height, cam.width)), 0.0)
    grids = []
    for impl in (numba_impl, numpy_impl):
        cells = np.zeros((120, 120), np.uint8)
        visits = np.zeros((120, 120), np.int32)
        impl.integrate_depth(cells, visits, depth, pose.camera_rows(),
                             pose.position, cam.fx, cam.fy, cam.cx, cam.cy,
                             -3.0, -3.0, 0.05, 2, 0.1, 1.41, 60, 60)
        grids.append((cells, visits))
    assert np.array_equal(grids[0][0], grids[1][0])
    assert np.array_equal(grids[0][1], grids[1][1])


@pytest.mark.parametrize("seed", [0, 4])
def test_fmm_agrees(seed):
    rng = np.random.default_rng(seed)
    trav = np.ones((70, 70), np.uint8)
    for _ in range(10):
        i, j = rng.integers(5, 60, 2)
        h, w = rng.integers(2, 14, 2)
        trav[i:i + h, j:j + w] = 0
    trav[1, 1] = 1
    a = numba_impl.fmm(trav, 1, 1, 0.05)
    b = numpy_impl.fmm(trav, 1, 1, 0.05)
    fin = np.isfinite(a)
    assert np.array_equal(fin, np.isfinite(b))
    assert np.allclose(a[fin], b[fin], atol=1e-12)
