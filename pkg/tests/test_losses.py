import numpy as np
import pytest

from splatnav.losses import (
    PSNR_CAP_DB,
    SSIM_C1,
    SSIM_C2,
    SSIM_WINDOW,
    UncoveredFrameError,
    geometry_loss,
    psnr,
    ssim,
    ssim_with_grad,
)


def naive_ssim(a, b, k=SSIM_WINDOW):
    """Independent sliding-window reference used as the oracle."""
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    vals = []
    for c in range(a.shape[2]):
        x, y = a[:, :, c], b[:, :, c]
        ss = []
        for i in range(x.shape[0] - k + 1):
            for j in range(x.shape[1] - k + 1):
                wx = x[i:i + k, j:j + k].ravel()
                wy = y[i:i + k, j:j + k].ravel()
                mx, my = wx.mean(), wy.mean()
                vx = (wx ** 2).mean() - mx ** 2
                vy = (wy ** 2).mean() - my ** 2
                cxy = (wx * wy).mean() - mx * my
                ss.append(((2 * mx * my + SSIM_C1) * (2 * cxy + SSIM_C2))
                          / ((mx ** 2 + my ** 2 + SSIM_C1) * (vx + vy + SSIM_C2)))
        vals.append(np.mean(ss))
    return float(np.mean(vals))


class TestSsim:
    def test_identical_images(self, rng):
        a = rng.uniform(0, 1, (20, 24, 3))
        assert ssim(a, a) == pytest.approx(1.0)

    def test_constant_images_stabilized(self):
        c = np.full((15, 15), 0.5)
        assert ssim(c, c) == pytest.approx(1.0)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_naive_reference(self, seed):
        r = np.random.default_rng(seed)
        a = r.uniform(0, 1, (18, 22, 3))
        b = r.uniform(0, 1, (18, 22, 3))
        assert ssim(a, b) == pytest.approx(naive_ssim(a, b), abs=1e-9)

    def test_checkerboard_vs_negative_near_minus_one(self):
        # closed form: means ~0.5, variance mu(1-mu)=0.25, covariance -0.25
        a = (np.indices((20, 20)).sum(axis=0) % 2).astype(float)
        b = 1.0 - a
        val = ssim(a, b)
        assert val == pytest.approx(naive_ssim(a, b), abs=1e-12)
        # closed-form window statistics with the C1/C2 stabilizers
        mu_a = 61 / 121
        mu_b = 1 - mu_a
        var = mu_a - mu_a ** 2
        cov = -mu_a * mu_b
        lum = (2 * mu_a * mu_b + SSIM_C1) / (mu_a ** 2 + mu_b ** 2 + SSIM_C1)
        cs = (2 * cov + SSIM_C2) / (2 * var + SSIM_C2)
        assert val == pytest.approx(lum * cs, abs=1e-3)
        assert val < -0.99

    def test_too_small_image_raises(self):
        with pytest.raises(ValueError, match="window"):
            ssim(np.zeros((8, 8)), np.zeros((8, 8)))

    def test_gradient_matches_finite_differences(self, rng):
        a = rng.uniform(0, 1, (14, 16))
        b = rng.uniform(0, 1, (14, 16))
        _, grad = ssim_with_grad(a, b)
        h = 1e-6
        for idx in [(0, 0), (5, 7), (13, 15), (7, 2), (3, 11)]:
            orig = a[idx]
            a[idx] = orig + h
            lp = ssim(a, b)
            a[idx] = orig - h
            lm = ssim(a, b)
            a[idx] = orig
            assert (lp - lm) / (2 * h) == pytest.approx(grad[idx], abs=1e-8)


class TestPsnr:
    def test_identical_capped(self, rng):
        a = rng.uniform(0, 1, (10, 10, 3))
        assert psnr(a, a, np.ones((10, 10), bool)) == PSNR_CAP_DB

    def test_known_mse_values(self):
        a = np.zeros((10, 10, 3))
        b = np.full((10, 10, 3), 0.1)  # mse 0.01 -> 20 dB
        assert psnr(a, b, np.ones((10, 10), bool)) == pytest.approx(20.0)
        c = np.ones((10, 10, 3))       # mse 1 -> 0 dB
        assert psnr(a, c, np.ones((10, 10), bool)) == pytest.approx(0.0)

    def test_no_covered_pixels_raises(self):
        a = np.zeros((4, 4, 3))
        with pytest.raises(UncoveredFrameError):
            psnr(a, a, np.zeros((4, 4), bool))


class TestGeometryLoss:
    def _frames(self, rng, h=16, w=20):
        color = rng.uniform(0, 1, (h, w, 3))
        depth = rng.uniform(1, 4, (h, w))
        alpha = np.ones((h, w))
        return color, depth, alpha

    def test_exact_reconstruction_zero(self, rng):
        color, depth, alpha = self._frames(rng)
        loss = geometry_loss(color, depth, alpha, color.copy(), depth.copy(),
                             0.2, 1.0)
        assert loss == pytest.approx(0.0, abs=1e-12)

    def test_pure_l1_color_offset(self, rng):
        color, depth, alpha = self._frames(rng)
        shifted = np.clip(color - 0.1, 0, 1)
        base = np.maximum(shifted + 0.1, 0.1)  # offset +0.1 everywhere
        loss = geometry_loss(base, depth, alpha, shifted, depth.copy(),
                             0.0, 1.0)
        assert loss == pytest.approx(0.1, abs=1e-12)

    def test_value_matches_independent_recomputation(self, rng):
        color, depth, alpha = self._frames(rng)
        obs_c = rng.uniform(0, 1, color.shape)
        obs_d = rng.uniform(1, 4, depth.shape)
        lam, mud = 0.2, 1.0
        loss = geometry_loss(color, depth, alpha, obs_c, obs_d, lam, mud)
        # straight-line re-evaluation of the three terms
        l1c = np.abs(color - obs_c).mean()
        l1d = np.abs(depth - obs_d).mean()
        expected = (1 - lam) * l1c + lam * (1 - naive_ssim(color, obs_c)) + mud * l1d
        assert loss == pytest.approx(expected, abs=1e-9)

    def test_zero_covered_raises(self, rng):
        color, depth, _ = self._frames(rng)
        alpha = np.zeros(depth.shape)
        with pytest.raises(UncoveredFrameError):
            geometry_loss(color, depth, alpha, color, depth, 0.2, 1.0)

    def test_loss_restricted_to_valid_depth(self, rng):
        color, depth, alpha = self._frames(rng)
        obs_d = depth.copy()
        obs_d[:8] = 0.0  # invalid depth rows must not contribute
        obs_c = color.copy()
        obs_c[:8] += 10.0  # would dominate if counted
        loss = geometry_loss(color, depth, alpha, obs_c, obs_d, 0.0, 1.0)
        assert loss == pytest.approx(0.0, abs=1e-12)
