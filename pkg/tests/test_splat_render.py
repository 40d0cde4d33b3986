import numpy as np
import pytest

from splatnav.camera import Camera, Pose
from splatnav.splat import EmptyMemoryError, GaussianMemory, render
from tests.conftest import make_random_memory


class TestRenderBasics:
    def test_single_opaque_gaussian_center_pixel(self, tiny_camera, origin_pose):
        mem = GaussianMemory()
        mem.add([[2.0, 0.0, 1.31]], [[0.3, 0.6, 0.9]], [0.3], [1.0])
        f = render(mem, origin_pose, tiny_camera)
        cy, cx = tiny_camera.height // 2, tiny_camera.width // 2
        assert f.color[cy, cx] == pytest.approx([0.3, 0.6, 0.9], abs=1e-6)
        assert f.depth[cy, cx] == pytest.approx(2.0, abs=1e-9)

    def test_uncovered_pixel_flagged(self, tiny_camera, origin_pose):
        mem = GaussianMemory()
        mem.add([[2.0, 0.0, 1.31]], [[0.3, 0.6, 0.9]], [0.05], [1.0])
        f = render(mem, origin_pose, tiny_camera)
        assert f.alpha[0, 0] == 0.0
        assert f.uncovered[0, 0]
        assert not f.uncovered[tiny_camera.height // 2, tiny_camera.width // 2]

    def test_front_gaussian_occludes(self, tiny_camera, origin_pose):
        mem = GaussianMemory()
        mem.add([[2.0, 0.0, 1.31], [3.0, 0.0, 1.31]],
                [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], [0.3, 0.3], [1.0, 0.8])
        f = render(mem, origin_pose, tiny_camera)
        cy, cx = tiny_camera.height // 2, tiny_camera.width // 2
        assert f.color[cy, cx, 0] > 0.99
        assert f.color[cy, cx, 1] < 0.01
        assert f.depth[cy, cx] == pytest.approx(2.0, abs=0.01)

    def test_empty_memory_raises(self, tiny_camera, origin_pose):
        with pytest.raises(EmptyMemoryError):
            render(GaussianMemory(), origin_pose, tiny_camera)

    def test_alpha_in_unit_interval(self, tiny_camera, origin_pose):
        mem = make_random_memory(3, n=20)
        f = render(mem, origin_pose, tiny_camera)
        assert f.alpha.min() >= 0.0 and f.alpha.max() <= 1.0

    def test_determinism_bit_identical(self, tiny_camera, origin_pose):
        mem = make_random_memory(5, n=25)
        a = render(mem, origin_pose, tiny_camera, with_features=True)
        b = render(mem, origin_pose, tiny_camera, with_features=True)
        for fa, fb in ((a.color, b.color), (a.depth, b.depth),
                       (a.feature, b.feature), (a.alpha, b.alpha)):
            assert np.array_equal(fa, fb)

    def test_feature_compositing_matches_color_weights(self, tiny_camera,
                                                       origin_pose):
        """Features composited with the same weights as colors."""
        mem = make_random_memory(6, n=10)
        mem.feature[:, :3] = mem.color  # mirror colors into feature slots
        f = render(mem, origin_pose, tiny_camera, with_features=True)
        covered = f.alpha > 1e-3
        assert np.allclose(f.feature[covered][:, :3], f.color[covered],
                           atol=1e-12)


class TestMemoryInvariants:
    def test_add_validates_radius_and_opacity(self):
        mem = GaussianMemory()
        with pytest.raises(ValueError, match="radius"):
            mem.add([[0, 0, 0]], [[1, 1, 1]], [0.0], [0.5])
        with pytest.raises(ValueError, match="opacity"):
            mem.add([[0, 0, 0]], [[1, 1, 1]], [0.1], [1.5])

    def test_feature_dim_fixed(self):
        mem = GaussianMemory(feature_dim=6)
        with pytest.raises(ValueError, match="feature"):
            mem.add([[0, 0, 0]], [[1, 1, 1]], [0.1], [0.5],
                    np.zeros((1, 4)))

    def test_frozen_blocks_geometry_mutation(self):
        mem = make_random_memory(1)
        mem.freeze()
        from splatnav.splat import FrozenMemoryError
        with pytest.raises(FrozenMemoryError):
            mem.add([[0, 0, 0]], [[1, 1, 1]], [0.1], [0.5])
        with pytest.raises(FrozenMemoryError):
            mem.keep(np.ones(mem.count, bool))

    def test_checkpoint_roundtrip(self, tmp_path):
        mem = make_random_memory(9, n=17)
        mem.scene_ref = "scenes/foo.json"
        path = tmp_path / "mem.gsm"
        mem.save(path)
        loaded = GaussianMemory.load(path)
        assert loaded.count == 17
        assert loaded.scene_ref == "scenes/foo.json"
        for a, b in ((mem.mu, loaded.mu), (mem.color, loaded.color),
                     (mem.radius, loaded.radius), (mem.opacity, loaded.opacity),
                     (mem.feature, loaded.feature)):
            assert np.array_equal(a, b)

    def test_checkpoint_rejects_wrong_magic(self, tmp_path):
        path = tmp_path / "junk.gsm"
        path.write_bytes(b"NOTAMEM0" + b"\x00" * 64)
        with pytest.raises(ValueError, match="checkpoint"):
            GaussianMemory.load(path)
