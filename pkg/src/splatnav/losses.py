"""Photometric losses over rendered frames: L1, SSIM, PSNR.

SSIM uses an 11x11 uniform window with the standard stabilizers
C1 = 0.01^2, C2 = 0.03^2 on unit-range images, averaged over valid window
positions. The analytic gradient below is exact for that definition and is
checked against finite differences in the test suite.

The combined reconstruction loss is

    (1 - w_ssim) * meanL1(color) + w_ssim * (1 - SSIM(color))
        + w_depth * meanL1(depth)

restricted to pixels that are both covered by the splat render and carry
valid observed depth. For the SSIM term, uncovered/invalid pixels are
clamped to the reference so they contribute neither error nor gradient.
"""

from __future__ import annotations

import math

import numpy as np

SSIM_WINDOW = 11
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
PSNR_CAP_DB = 99.0
COVERAGE_EPS = 1e-3


class UncoveredFrameError(ValueError):
    """Raised when a loss is requested over zero covered pixels."""


def _box_sum(img: np.ndarray, k: int) -> np.ndarray:
    """Sum of every k-by-k window (valid positions only)."""
    c = np.cumsum(np.cumsum(img, axis=0), axis=1)
    c = np.pad(c, ((1, 0), (1, 0)))
    return c[k:, k:] - c[:-k, k:] - c[k:, :-k] + c[:-k, :-k]


def _box_adjoint(g: np.ndarray, k: int, shape: tuple[int, int]) -> np.ndarray:
    """Adjoint of ``_box_sum``: scatter window values back onto pixels."""
    padded = np.pad(g, ((k - 1, k - 1), (k - 1, k - 1)))
    out = _box_sum(padded, k)
    assert out.shape == shape
    return out


def _ssim_channel(x: np.ndarray, y: np.ndarray, want_grad: bool):
    k = SSIM_WINDOW
    m = float(k * k)
    mu_x = _box_sum(x, k) / m
    mu_y = _box_sum(y, k) / m
    var_x = _box_sum(x * x, k) / m - mu_x ** 2
    var_y = _box_sum(y * y, k) / m - mu_y ** 2
    cov = _box_sum(x * y, k) / m - mu_x * mu_y
    a1 = 2.0 * mu_x * mu_y + SSIM_C1
    b1 = mu_x ** 2 + mu_y ** 2 + SSIM_C1
    a2 = 2.0 * cov + SSIM_C2
    b2 = var_x + var_y + SSIM_C2
    s = (a1 * a2) / (b1 * b2)
    mssim = float(np.mean(s))
    if not want_grad:
        return mssim, None
    nw = s.size
    t = 1.0 / (b1 * b2)
    g1 = 2.0 * t * mu_y * a2 - 2.0 * mu_x * s / b1     # dS/d mu_x
    g2 = -s / b2                                       # dS/d var_x
    g3 = 2.0 * t * a1                                  # dS/d cov
    base = _box_adjoint(g1 - 2.0 * g2 * mu_x - g3 * mu_y, k, x.shape)
    gx = base + 2.0 * x * _box_adjoint(g2, k, x.shape) + y * _box_adjoint(g3, k, x.shape)
    return mssim, gx / (nw * m)


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean windowed SSIM in [-1, 1]; images may be (H, W) or (H, W, C)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise ValueError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    vals = [_ssim_channel(a[:, :, c], b[:, :, c], False)[0] for c in range(a.shape[2])]
    return float(np.mean(vals))


def ssim_with_grad(a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    """SSIM plus d(ssim)/d(a); gradient shape matches ``a``."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise ValueError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    squeeze = a.ndim == 2
    if squeeze:
        a = a[:, :, None]
        b = b[:, :, None]
    n_ch = a.shape[2]
    total = 0.0
    grad = np.empty_like(a)
    for c in range(n_ch):
        val, g = _ssim_channel(a[:, :, c], b[:, :, c], True)
        total += val
        grad[:, :, c] = g / n_ch
    if squeeze:
        grad = grad[:, :, 0]
    return total / n_ch, grad


def psnr(rendered_color: np.ndarray, observed_color: np.ndarray,
         mask: np.ndarray) -> float:
    """10 log10(1 / MSE) over masked pixels, capped at 99 dB."""
    if rendered_color.shape != observed_color.shape:
        raise ValueError("shape mismatch")
    if not mask.any():
        raise UncoveredFrameError("no covered pixels for PSNR")
    diff = (rendered_color - observed_color)[mask]
    mse = float(np.mean(diff * diff))
    if mse <= 0.0:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(1.0 / mse), PSNR_CAP_DB)


def coverage_mask(alpha: np.ndarray, obs_depth: np.ndarray) -> np.ndarray:
    return (alpha > COVERAGE_EPS) & (obs_depth > 0.0)


def geometry_loss(rendered_color, rendered_depth, alpha, obs_color, obs_depth,
                  ssim_weight: float, depth_weight: float,
                  want_grads: bool = False, mask: np.ndarray | None = None):
    """Reconstruction loss; optionally also (dL/d color, dL/d depth) maps.

    Gradient maps are zero outside the covered/valid mask, so they can be
    fed straight into the splat backward kernel. ``mask`` overrides the
    coverage test (used by gradient checks to pin the loss domain, which
    otherwise jumps when a pixel crosses the coverage threshold).
    """
    if mask is None:
        mask = coverage_mask(alpha, obs_depth)
    n = int(mask.sum())
    if n == 0:
        raise UncoveredFrameError("no covered valid-depth pixels")

    cdiff = rendered_color - obs_color
    l1_color = float(np.mean(np.abs(cdiff[mask])))
    ddiff = rendered_depth - obs_depth
    l1_depth = float(np.mean(np.abs(ddiff[mask])))

    clamped = np.where(mask[:, :, None], rendered_color, obs_color)
    if want_grads:
        s_val, s_grad = ssim_with_grad(clamped, obs_color)
    else:
        s_val, s_grad = ssim(clamped, obs_color), None

    loss = ((1.0 - ssim_weight) * l1_color
            + ssim_weight * (1.0 - s_val)
            + depth_weight * l1_depth)
    if not want_grads:
        return loss

    d_color = np.zeros_like(rendered_color)
    scale_c = (1.0 - ssim_weight) / (3.0 * n)
    d_color[mask] = scale_c * np.sign(cdiff[mask])
    d_color -= ssim_weight * np.where(mask[:, :, None], s_grad, 0.0)
    d_depth = np.zeros_like(rendered_depth)
    d_depth[mask] = (depth_weight / n) * np.sign(ddiff[mask])
    return loss, d_color, d_depth
