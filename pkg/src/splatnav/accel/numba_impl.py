"""Numba-jitted hot kernels: splatting, raycasting, depth integration, FMM.

Every function here has a signature-identical twin in ``numpy_impl``; the
dispatch in ``splatnav.accel`` picks one backend at import time. Keep the
math in lockstep with the numpy twin — the equivalence tests compare them
to ~1e-12.
"""

import math

import numpy as np
from numba import njit

from .kconst import (
    ALPHA_EPS,
    ALPHA_MAX,
    CELL_FREE,
    CELL_OCCUPIED,
    CELL_UNKNOWN,
    CUT_SIGMA,
    RAY_EPS,
    RAY_FAR,
    SAT_NONE,
    SIGMA_MAX_PX,
    SIGMA_MIN_PX,
    T_EPS,
    ZC_MIN,
)


@njit(cache=True)
def _project(mu, cam_r, cam_pos, fx, fy, cx, cy):
    """Camera-space depth, pixel coords and Euclidean range per gaussian."""
    n = mu.shape[0]
    uc = np.empty(n)
    vc = np.empty(n)
    zc = np.empty(n)
    rng = np.empty(n)
    for k in range(n):
        rx = mu[k, 0] - cam_pos[0]
        ry = mu[k, 1] - cam_pos[1]
        rz = mu[k, 2] - cam_pos[2]
        xn = cam_r[0, 0] * rx + cam_r[0, 1] * ry + cam_r[0, 2] * rz
        yn = cam_r[1, 0] * rx + cam_r[1, 1] * ry + cam_r[1, 2] * rz
        zn = cam_r[2, 0] * rx + cam_r[2, 1] * ry + cam_r[2, 2] * rz
        zc[k] = zn
        rng[k] = math.sqrt(rx * rx + ry * ry + rz * rz)
        if zn > ZC_MIN:
            uc[k] = fx * xn / zn + cx
            vc[k] = fy * yn / zn + cy
        else:
            uc[k] = 0.0
            vc[k] = 0.0
    return uc, vc, zc, rng


@njit(cache=True)
def _depth_order(zc):
    """Indices of visible gaussians sorted front to back (stable)."""
    n = zc.shape[0]
    m = 0
    for k in range(n):
        if zc[k] > ZC_MIN:
            m += 1
    vis = np.empty(m, np.int64)
    zv = np.empty(m)
    i = 0
    for k in range(n):
        if zc[k] > ZC_MIN:
            vis[i] = k
            zv[i] = zc[k]
            i += 1
    srt = np.argsort(zv, kind="mergesort")
    out = np.empty(m, np.int64)
    for i in range(m):
        out[i] = vis[srt[i]]
    return out


@njit(cache=True)
def _sigma_px(radius_k, zc_k, fx):
    s = fx * radius_k / zc_k
    if s < SIGMA_MIN_PX:
        s = SIGMA_MIN_PX
    elif s > SIGMA_MAX_PX:
        s = SIGMA_MAX_PX
    return s


@njit(cache=True)
def splat_forward(mu, color, radius, opacity, feature, cam_r, cam_pos,
                  fx, fy, cx, cy, height, width, want_feature):
    """Front-to-back alpha compositing of isotropic gaussians.

    Per pixel, contribution i gets weight w_i = a_i * prod_{j<i}(1 - a_j)
    with a_i = opacity_i * exp(-d^2 / (2 sigma_i^2)); color, depth (Euclidean
    range to the center) and features are weight-normalized sums. Once a
    pixel's transmittance saturates below T_EPS its order position is
    recorded in ``sat`` and later gaussians are skipped; the backward pass
    replays the same cut so gradients stay exact.

    Returns (color_img, depth_img, feat_img, alpha_img, wsum, t_final,
    order, sat).
    """
    fdim = feature.shape[1] if want_feature else 0
    img_c = np.zeros((height, width, 3))
    img_d = np.zeros((height, width))
    img_f = np.zeros((height, width, fdim))
    wsum = np.zeros((height, width))
    t_cur = np.ones((height, width))
    sat = np.full((height, width), SAT_NONE, np.int32)
    n_unsat = height * width

    uc, vc, zc, rng = _project(mu, cam_r, cam_pos, fx, fy, cx, cy)
    order = _depth_order(zc)

    for oi in range(order.shape[0]):
        if n_unsat == 0:
            break  # every pixel saturated: nothing behind can contribute
        k = order[oi]
        sig = _sigma_px(radius[k], zc[k], fx)
        cut2 = (CUT_SIGMA * sig) * (CUT_SIGMA * sig)
        half = CUT_SIGMA * sig
        x0 = int(math.floor(uc[k] - half - 0.5))
        x1 = int(math.ceil(uc[k] + half - 0.5)) + 1
        y0 = int(math.floor(vc[k] - half - 0.5))
        y1 = int(math.ceil(vc[k] + half - 0.5)) + 1
        if x0 < 0:
            x0 = 0
        if y0 < 0:
            y0 = 0
        if x1 > width:
            x1 = width
        if y1 > height:
            y1 = height
        if x0 >= x1 or y0 >= y1:
            continue
        inv2s2 = 1.0 / (2.0 * sig * sig)
        opa = opacity[k]
        zk = rng[k]
        for py in range(y0, y1):
            dy = (py + 0.5) - vc[k]
            dy2 = dy * dy
            for px in range(x0, x1):
                if sat[py, px] < oi:
                    continue
                dx = (px + 0.5) - uc[k]
                d2 = dx * dx + dy2
                if d2 > cut2:
                    continue
                a = opa * math.exp(-d2 * inv2s2)
                if a > ALPHA_MAX:
                    a = ALPHA_MAX
                if a < ALPHA_EPS:
                    continue
                w = a * t_cur[py, px]
                wsum[py, px] += w
                img_c[py, px, 0] += w * color[k, 0]
                img_c[py, px, 1] += w * color[k, 1]
                img_c[py, px, 2] += w * color[k, 2]
                img_d[py, px] += w * zk
                if want_feature:
                    for f in range(fdim):
                        img_f[py, px, f] += w * feature[k, f]
                t_new = t_cur[py, px] * (1.0 - a)
                t_cur[py, px] = t_new
                if t_new < T_EPS and sat[py, px] == SAT_NONE:
                    sat[py, px] = oi
                    n_unsat -= 1
    alpha = np.empty((height, width))
    for py in range(height):
        for px in range(width):
            w = wsum[py, px]
            alpha[py, px] = 1.0 - t_cur[py, px]
            if w > 0.0:
                inv = 1.0 / w
                img_c[py, px, 0] *= inv
                img_c[py, px, 1] *= inv
                img_c[py, px, 2] *= inv
                img_d[py, px] *= inv
                if want_feature:
                    for f in range(fdim):
                        img_f[py, px, f] *= inv
    return img_c, img_d, img_f, alpha, wsum, t_cur, order, sat


@njit(cache=True)
def splat_backward(mu, color, radius, opacity, feature, cam_r, cam_pos,
                   fx, fy, cx, cy, height, width,
                   order, t_final, wsum, img_c, img_d, img_f, sat,
                   d_color, d_depth, d_feat, need_geom, need_feature):
    """Exact adjoint of ``splat_forward``.

    Walks gaussians back to front, reconstructing each pre-blend
    transmittance as t_behind / (1 - a); the running suffix sum s_acc
    carries d(loss)/d(alpha_i) contributions of everything composited
    behind i. Guard conditions replicate the forward pass exactly,
    including the per-pixel saturation cutoff.
    """
    n = mu.shape[0]
    fdim = feature.shape[1]
    d_mu = np.zeros((n, 3))
    d_col = np.zeros((n, 3))
    d_rad = np.zeros(n)
    d_opa = np.zeros(n)
    d_fea = np.zeros((n, fdim))

    uc, vc, zc, rng = _project(mu, cam_r, cam_pos, fx, fy, cx, cy)
    t_behind = t_final.copy()
    s_acc = np.zeros((height, width))

    # if every pixel saturated, gaussians beyond the deepest saturation
    # index were never composited and can be skipped wholesale
    oi_start = order.shape[0] - 1
    all_sat = True
    deepest = -1
    for py in range(height):
        for px in range(width):
            v = sat[py, px]
            if v == SAT_NONE:
                all_sat = False
                break
            if v > deepest:
                deepest = v
        if not all_sat:
            break
    if all_sat and deepest < oi_start:
        oi_start = deepest

    for oi in range(oi_start, -1, -1):
        k = order[oi]
        raw_sig = fx * radius[k] / zc[k]
        sig = raw_sig
        clamped = False
        if sig < SIGMA_MIN_PX:
            sig = SIGMA_MIN_PX
            clamped = True
        elif sig > SIGMA_MAX_PX:
            sig = SIGMA_MAX_PX
            clamped = True
        cut2 = (CUT_SIGMA * sig) * (CUT_SIGMA * sig)
        half = CUT_SIGMA * sig
        x0 = int(math.floor(uc[k] - half - 0.5))
        x1 = int(math.ceil(uc[k] + half - 0.5)) + 1
        y0 = int(math.floor(vc[k] - half - 0.5))
        y1 = int(math.ceil(vc[k] + half - 0.5)) + 1
        if x0 < 0:
            x0 = 0
        if y0 < 0:
            y0 = 0
        if x1 > width:
            x1 = width
        if y1 > height:
            y1 = height
        if x0 >= x1 or y0 >= y1:
            continue
        inv2s2 = 1.0 / (2.0 * sig * sig)
        opa = opacity[k]
        zk = rng[k]
        rx = mu[k, 0] - cam_pos[0]
        ry = mu[k, 1] - cam_pos[1]
        rz = mu[k, 2] - cam_pos[2]
        xn = cam_r[0, 0] * rx + cam_r[0, 1] * ry + cam_r[0, 2] * rz
        yn = cam_r[1, 0] * rx + cam_r[1, 1] * ry + cam_r[1, 2] * rz
        zn = zc[k]
        du_acc = 0.0
        dv_acc = 0.0
        dsig_acc = 0.0
        dz_range_acc = 0.0
        for py in range(y0, y1):
            dy = (py + 0.5) - vc[k]
            dy2 = dy * dy
            for px in range(x0, x1):
                if sat[py, px] < oi:
                    continue
                dx = (px + 0.5) - uc[k]
                d2 = dx * dx + dy2
                if d2 > cut2:
                    continue
                g = math.exp(-d2 * inv2s2)
                a = opa * g
                ahit_max = False
                if a > ALPHA_MAX:
                    a = ALPHA_MAX
                    ahit_max = True
                if a < ALPHA_EPS:
                    continue
                one_m = 1.0 - a
                t_i = t_behind[py, px] / one_m
                w = a * t_i
                ws = wsum[py, px]
                inv_ws = 1.0 / ws
                dw = 0.0
                if need_geom:
                    for c in range(3):
                        dc = d_color[py, px, c]
                        if dc != 0.0:
                            d_col[k, c] += dc * w * inv_ws
                            dw += dc * (color[k, c] - img_c[py, px, c]) * inv_ws
                    dd = d_depth[py, px]
                    if dd != 0.0:
                        dz_range_acc += dd * w * inv_ws
                        dw += dd * (zk - img_d[py, px]) * inv_ws
                if need_feature:
                    for f in range(fdim):
                        df = d_feat[py, px, f]
                        if df != 0.0:
                            d_fea[k, f] += df * w * inv_ws
                            dw += df * (feature[k, f] - img_f[py, px, f]) * inv_ws
                if need_geom:
                    da = t_i * dw - s_acc[py, px] / one_m
                    if not ahit_max:
                        d_opa[k] += g * da
                        dg = opa * da
                        du_acc += dg * g * dx * (2.0 * inv2s2)
                        dv_acc += dg * g * dy * (2.0 * inv2s2)
                        dsig_acc += dg * g * d2 * (2.0 * inv2s2) / sig
                    s_acc[py, px] += w * dw
                t_behind[py, px] = t_i
        if need_geom:
            # chain pixel-space grads into camera space, then world space
            dxn = du_acc * fx / zn
            dyn = dv_acc * fy / zn
            dzn = -du_acc * fx * xn / (zn * zn) - dv_acc * fy * yn / (zn * zn)
            if not clamped:
                d_rad[k] += dsig_acc * fx / zn
                dzn += -dsig_acc * fx * radius[k] / (zn * zn)
            gx = dxn * cam_r[0, 0] + dyn * cam_r[1, 0] + dzn * cam_r[2, 0]
            gy = dxn * cam_r[0, 1] + dyn * cam_r[1, 1] + dzn * cam_r[2, 1]
            gz = dxn * cam_r[0, 2] + dyn * cam_r[1, 2] + dzn * cam_r[2, 2]
            if zk > 0.0 and dz_range_acc != 0.0:
                gx += dz_range_acc * rx / zk
                gy += dz_range_acc * ry / zk
                gz += dz_range_acc * rz / zk
            d_mu[k, 0] += gx
            d_mu[k, 1] += gy
            d_mu[k, 2] += gz
    return d_mu, d_col, d_rad, d_opa, d_fea


@njit(cache=True)
def entry_alpha(mu, radius, opacity, entry_ids, n_entries, cam_r, cam_pos,
                fx, fy, cx, cy, height, width):
    """Per-entry accumulated alpha, compositing each entry independently."""
    t = np.ones((n_entries, height, width))
    uc, vc, zc, rng = _project(mu, cam_r, cam_pos, fx, fy, cx, cy)
    order = _depth_order(zc)
    for oi in range(order.shape[0]):
        k = order[oi]
        e = entry_ids[k]
        if e < 0:
            continue
        sig = _sigma_px(radius[k], zc[k], fx)
        cut2 = (CUT_SIGMA * sig) * (CUT_SIGMA * sig)
        half = CUT_SIGMA * sig
        x0 = max(int(math.floor(uc[k] - half - 0.5)), 0)
        x1 = min(int(math.ceil(uc[k] + half - 0.5)) + 1, width)
        y0 = max(int(math.floor(vc[k] - half - 0.5)), 0)
        y1 = min(int(math.ceil(vc[k] + half - 0.5)) + 1, height)
        if x0 >= x1 or y0 >= y1:
            continue
        inv2s2 = 1.0 / (2.0 * sig * sig)
        opa = opacity[k]
        for py in range(y0, y1):
            dy = (py + 0.5) - vc[k]
            dy2 = dy * dy
            for px in range(x0, x1):
                dx = (px + 0.5) - uc[k]
                d2 = dx * dx + dy2
                if d2 > cut2:
                    continue
                a = opa * math.exp(-d2 * inv2s2)
                if a > ALPHA_MAX:
                    a = ALPHA_MAX
                if a < ALPHA_EPS:
                    continue
                t[e, py, px] *= 1.0 - a
    return 1.0 - t


@njit(cache=True)
def raycast(boxes, box_colors, box_ids, cam_r, cam_pos, fx, fy, cx, cy,
            height, width, light_dir, ambient, background):
    """Nearest-hit raycast against axis-aligned boxes with Lambert shading.

    Returns (rgb, range_img, id_img); range_img is 0 where nothing is hit.
    """
    nb = boxes.shape[0]
    rgb = np.empty((height, width, 3))
    rng_img = np.zeros((height, width))
    id_img = np.zeros((height, width), np.int32)
    for py in range(height):
        b = (py + 0.5 - cy) / fy
        for px in range(width):
            a = (px + 0.5 - cx) / fx
            dx = cam_r[2, 0] + a * cam_r[0, 0] + b * cam_r[1, 0]
            dy = cam_r[2, 1] + a * cam_r[0, 1] + b * cam_r[1, 1]
            dz = cam_r[2, 2] + a * cam_r[0, 2] + b * cam_r[1, 2]
            inv = 1.0 / math.sqrt(dx * dx + dy * dy + dz * dz)
            dx *= inv
            dy *= inv
            dz *= inv
            best_t = RAY_FAR
            best_b = -1
            best_axis = -1
            best_sign = 1.0
            for bi in range(nb):
                t0 = RAY_EPS
                t1 = RAY_FAR
                axis = -1
                sign = 1.0
                miss = False
                for ax in range(3):
                    o = cam_pos[ax]
                    d = dx if ax == 0 else (dy if ax == 1 else dz)
                    mn = boxes[bi, ax]
                    mx = boxes[bi, ax + 3]
                    if abs(d) < 1e-12:
                        if o < mn or o > mx:
                            miss = True
                            break
                    else:
                        ta = (mn - o) / d
                        tb = (mx - o) / d
                        s = -1.0 if d > 0.0 else 1.0
                        if ta > tb:
                            tmp = ta
                            ta = tb
                            tb = tmp
                        if ta > t0:
                            t0 = ta
                            axis = ax
                            sign = s
                        if tb < t1:
                            t1 = tb
                if miss or axis < 0 or t0 > t1:
                    continue
                if t0 < best_t:
                    best_t = t0
                    best_b = bi
                    best_axis = axis
                    best_sign = sign
            if best_b < 0:
                rgb[py, px, 0] = background[0]
                rgb[py, px, 1] = background[1]
                rgb[py, px, 2] = background[2]
            else:
                ndl = best_sign * (light_dir[best_axis])
                if ndl < 0.0:
                    ndl = 0.0
                shade = ambient + (1.0 - ambient) * ndl
                rgb[py, px, 0] = box_colors[best_b, 0] * shade
                rgb[py, px, 1] = box_colors[best_b, 1] * shade
                rgb[py, px, 2] = box_colors[best_b, 2] * shade
                rng_img[py, px] = best_t
                id_img[py, px] = box_ids[best_b]
    return rgb, rng_img, id_img


@njit(cache=True)
def integrate_depth(cells, visits, depth_img, cam_r, cam_pos, fx, fy, cx, cy,
                    origin_x, origin_y, res, stride, min_h, max_h, agent_i, agent_j):
    """Carve FREE space and mark OCCUPIED hits into a 2D grid, in place.

    Hits above max_h are ignored entirely; hits below min_h free their own
    cell (floor). FREE never downgrades OCCUPIED. Invalid pixels carry 0.
    """
    h_img, w_img = depth_img.shape
    h_cells, w_cells = cells.shape
    for py in range(0, h_img, stride):
        b = (py + 0.5 - cy) / fy
        for px in range(0, w_img, stride):
            t = depth_img[py, px]
            if t <= 0.0:
                continue
            a = (px + 0.5 - cx) / fx
            dx = cam_r[2, 0] + a * cam_r[0, 0] + b * cam_r[1, 0]
            dy = cam_r[2, 1] + a * cam_r[0, 1] + b * cam_r[1, 1]
            dz = cam_r[2, 2] + a * cam_r[0, 2] + b * cam_r[1, 2]
            inv = 1.0 / math.sqrt(dx * dx + dy * dy + dz * dz)
            wx = cam_pos[0] + t * dx * inv
            wy = cam_pos[1] + t * dy * inv
            wz = cam_pos[2] + t * dz * inv
            if wz > max_h:
                continue
            hit_occ = wz >= min_h
            hi = int(math.floor((wy - origin_y) / res))
            hj = int(math.floor((wx - origin_x) / res))
            if hi < 0 or hi >= h_cells or hj < 0 or hj >= w_cells:
                continue
            # Bresenham from agent cell to hit cell
            i0 = agent_i
            j0 = agent_j
            di = abs(hi - i0)
            dj = -abs(hj - j0)
            si = 1 if hi > i0 else -1
            sj = 1 if hj > j0 else -1
            err = di + dj
            while True:
                at_end = i0 == hi and j0 == hj
                if at_end:
                    if hit_occ:
                        cells[i0, j0] = CELL_OCCUPIED
                    elif cells[i0, j0] != CELL_OCCUPIED:
                        cells[i0, j0] = CELL_FREE
                elif cells[i0, j0] != CELL_OCCUPIED:
                    cells[i0, j0] = CELL_FREE
                visits[i0, j0] += 1
                if at_end:
                    break
                e2 = 2 * err
                if e2 >= dj:
                    err += dj
                    i0 += si
                if e2 <= di:
                    err += di
                    j0 += sj
    return cells


@njit(cache=True)
def _heap_push(keys, idxs, n, key, idx):
    keys[n] = key
    idxs[n] = idx
    i = n
    n += 1
    while i > 0:
        p = (i - 1) // 2
        if keys[p] <= keys[i]:
            break
        keys[p], keys[i] = keys[i], keys[p]
        idxs[p], idxs[i] = idxs[i], idxs[p]
        i = p
    return n


@njit(cache=True)
def _heap_pop(keys, idxs, n):
    key = keys[0]
    idx = idxs[0]
    n -= 1
    keys[0] = keys[n]
    idxs[0] = idxs[n]
    i = 0
    while True:
        l = 2 * i + 1
        r = l + 1
        m = i
        if l < n and keys[l] < keys[m]:
            m = l
        if r < n and keys[r] < keys[m]:
            m = r
        if m == i:
            break
        keys[m], keys[i] = keys[i], keys[m]
        idxs[m], idxs[i] = idxs[i], idxs[m]
        i = m
    return key, idx, n


@njit(cache=True)
def _fmm_update(dist, state, trav, i, j, h, w, res):
    a = np.inf
    b = np.inf
    if i > 0 and state[i - 1, j] == 2:
        a = dist[i - 1, j]
    if i < h - 1 and state[i + 1, j] == 2 and dist[i + 1, j] < a:
        a = dist[i + 1, j]
    if j > 0 and state[i, j - 1] == 2:
        b = dist[i, j - 1]
    if j < w - 1 and state[i, j + 1] == 2 and dist[i, j + 1] < b:
        b = dist[i, j + 1]
    if a == np.inf and b == np.inf:
        return np.inf
    if a == np.inf:
        return b + res
    if b == np.inf:
        return a + res
    diff = a - b
    if diff < 0.0:
        diff = -diff
    if diff < res:
        return 0.5 * (a + b + math.sqrt(2.0 * res * res - diff * diff))
    return (a if a < b else b) + res


FMM_SEED_RADIUS = 5


@njit(cache=True)
def fmm(trav, src_i, src_j, res):
    """First-order upwind fast marching solving |grad T| = 1 on a grid.

    ``trav`` is uint8 (nonzero = passable). Cells within a small ball of
    the source whose bounding rectangle is fully passable are seeded with
    exact Euclidean distances, which removes most of the point-source
    startup error. Unreachable or blocked cells stay +inf.
    """
    h, w = trav.shape
    dist = np.full((h, w), np.inf)
    state = np.zeros((h, w), np.uint8)  # 0 far, 1 narrow, 2 accepted
    if src_i < 0 or src_i >= h or src_j < 0 or src_j >= w or trav[src_i, src_j] == 0:
        return dist
    dist[src_i, src_j] = 0.0
    state[src_i, src_j] = 2
    r = FMM_SEED_RADIUS
    for di in range(-r, r + 1):
        for dj in range(-r, r + 1):
            if di == 0 and dj == 0:
                continue
            if di * di + dj * dj > r * r:
                continue
            ni = src_i + di
            nj = src_j + dj
            if ni < 0 or ni >= h or nj < 0 or nj >= w:
                continue
            i0 = ni if ni < src_i else src_i
            i1 = ni if ni > src_i else src_i
            j0 = nj if nj < src_j else src_j
            j1 = nj if nj > src_j else src_j
            clear = True
            for ci in range(i0, i1 + 1):
                for cj in range(j0, j1 + 1):
                    if trav[ci, cj] == 0:
                        clear = False
                        break
                if not clear:
                    break
            if clear:
                dist[ni, nj] = res * math.sqrt(di * di + dj * dj)
                state[ni, nj] = 2

    cap = 8 * h * w + 64
    keys = np.empty(cap)
    idxs = np.empty(cap, np.int64)
    n = 0
    for i in range(h):
        for j in range(w):
            if state[i, j] != 2:
                continue
            for d in range(4):
                ni = i + (1 if d == 0 else (-1 if d == 1 else 0))
                nj = j + (1 if d == 2 else (-1 if d == 3 else 0))
                if ni < 0 or ni >= h or nj < 0 or nj >= w:
                    continue
                if trav[ni, nj] == 0 or state[ni, nj] == 2:
                    continue
                t = _fmm_update(dist, state, trav, ni, nj, h, w, res)
                if t < dist[ni, nj]:
                    dist[ni, nj] = t
                    state[ni, nj] = 1
                    n = _heap_push(keys, idxs, n, t, ni * w + nj)

    while n > 0:
        key, idx, n = _heap_pop(keys, idxs, n)
        i = idx // w
        j = idx % w
        if state[i, j] == 2:
            continue
        if key > dist[i, j]:
            continue  # stale heap entry
        state[i, j] = 2
        for d in range(4):
            ni = i + (1 if d == 0 else (-1 if d == 1 else 0))
            nj = j + (1 if d == 2 else (-1 if d == 3 else 0))
            if ni < 0 or ni >= h or nj < 0 or nj >= w:
                continue
            if trav[ni, nj] == 0 or state[ni, nj] == 2:
                continue
            t = _fmm_update(dist, state, trav, ni, nj, h, w, res)
            if t < dist[ni, nj]:
                dist[ni, nj] = t
                state[ni, nj] = 1
                n = _heap_push(keys, idxs, n, t, ni * w + nj)
    return dist
