"""Pure-numpy fallback kernels, signature-identical to ``numba_impl``.

Splatting walks gaussians in the same global depth order as the jitted
backend but applies each footprint as a vectorized block, so per-pixel
arithmetic follows the identical sequence of operations. Useful when numba
is unavailable or disabled via SPLATNAV_NUMBA=0; expect a large slowdown
on full-size scenes (see benchmarks/bench_kernels.py).
"""

import heapq
import math

import numpy as np

from .kconst import (
    ALPHA_EPS,
    ALPHA_MAX,
    CELL_FREE,
    CELL_OCCUPIED,
    CUT_SIGMA,
    RAY_EPS,
    RAY_FAR,
    SAT_NONE,
    SIGMA_MAX_PX,
    SIGMA_MIN_PX,
    T_EPS,
    ZC_MIN,
)


def _project(mu, cam_r, cam_pos, fx, fy, cx, cy):
    rel = mu - cam_pos[None, :]
    cam = rel @ cam_r.T
    zc = cam[:, 2]
    rng = np.sqrt(np.sum(rel * rel, axis=1))
    safe = zc > ZC_MIN
    uc = np.zeros(mu.shape[0])
    vc = np.zeros(mu.shape[0])
    uc[safe] = fx * cam[safe, 0] / zc[safe] + cx
    vc[safe] = fy * cam[safe, 1] / zc[safe] + cy
    return uc, vc, zc, rng, cam


def _depth_order(zc):
    vis = np.nonzero(zc > ZC_MIN)[0]
    return vis[np.argsort(zc[vis], kind="mergesort")].astype(np.int64)


def _bbox(u, v, sig, height, width):
    half = CUT_SIGMA * sig
    x0 = max(int(math.floor(u - half - 0.5)), 0)
    x1 = min(int(math.ceil(u + half - 0.5)) + 1, width)
    y0 = max(int(math.floor(v - half - 0.5)), 0)
    y1 = min(int(math.ceil(v + half - 0.5)) + 1, height)
    return x0, x1, y0, y1


def splat_forward(mu, color, radius, opacity, feature, cam_r, cam_pos,
                  fx, fy, cx, cy, height, width, want_feature):
    fdim = feature.shape[1] if want_feature else 0
    img_c = np.zeros((height, width, 3))
    img_d = np.zeros((height, width))
    img_f = np.zeros((height, width, fdim))
    wsum = np.zeros((height, width))
    t_cur = np.ones((height, width))
    sat = np.full((height, width), SAT_NONE, np.int32)

    uc, vc, zc, rng, _ = _project(mu, cam_r, cam_pos, fx, fy, cx, cy)
    order = _depth_order(zc)

    n_unsat = height * width
    for oi in range(order.shape[0]):
        if n_unsat == 0:
            break  # every pixel saturated: nothing behind can contribute
        k = order[oi]
        sig = min(max(fx * radius[k] / zc[k], SIGMA_MIN_PX), SIGMA_MAX_PX)
        x0, x1, y0, y1 = _bbox(uc[k], vc[k], sig, height, width)
        if x0 >= x1 or y0 >= y1:
            continue
        cut2 = (CUT_SIGMA * sig) ** 2
        inv2s2 = 1.0 / (2.0 * sig * sig)
        dxs = (np.arange(x0, x1) + 0.5) - uc[k]
        dys = (np.arange(y0, y1) + 0.5) - vc[k]
        d2 = dxs[None, :] ** 2 + dys[:, None] ** 2
        a = np.minimum(opacity[k] * np.exp(-d2 * inv2s2), ALPHA_MAX)
        sat_blk = sat[y0:y1, x0:x1]
        m = (d2 <= cut2) & (a >= ALPHA_EPS) & (sat_blk >= oi)
        if not m.any():
            continue
        tb = t_cur[y0:y1, x0:x1]
        w = np.where(m, a * tb, 0.0)
        wsum[y0:y1, x0:x1] += w
        img_c[y0:y1, x0:x1] += w[:, :, None] * color[k]
        img_d[y0:y1, x0:x1] += w * rng[k]
        if want_feature:
            img_f[y0:y1, x0:x1] += w[:, :, None] * feature[k]
        t_new = np.where(m, tb * (1.0 - a), tb)
        t_cur[y0:y1, x0:x1] = t_new
        newly = m & (t_new < T_EPS) & (sat_blk == SAT_NONE)
        n_unsat -= int(newly.sum())
        sat[y0:y1, x0:x1] = np.where(newly, oi, sat_blk)

    alpha = 1.0 - t_cur
    covered = wsum > 0.0
    inv = np.where(covered, 1.0 / np.maximum(wsum, 1e-300), 0.0)
    img_c *= inv[:, :, None]
    img_d *= inv
    if want_feature:
        img_f *= inv[:, :, None]
    return img_c, img_d, img_f, alpha, wsum, t_cur, order, sat


def splat_backward(mu, color, radius, opacity, feature, cam_r, cam_pos,
                   fx, fy, cx, cy, height, width,
                   order, t_final, wsum, img_c, img_d, img_f, sat,
                   d_color, d_depth, d_feat, need_geom, need_feature):
    n = mu.shape[0]
    fdim = feature.shape[1]
    d_mu = np.zeros((n, 3))
    d_col = np.zeros((n, 3))
    d_rad = np.zeros(n)
    d_opa = np.zeros(n)
    d_fea = np.zeros((n, fdim))

    uc, vc, zc, rng, cam = _project(mu, cam_r, cam_pos, fx, fy, cx, cy)
    t_behind = t_final.copy()
    s_acc = np.zeros((height, width))

    oi_start = order.shape[0] - 1
    if (sat != SAT_NONE).all() and sat.size:
        oi_start = min(oi_start, int(sat.max()))

    for oi in range(oi_start, -1, -1):
        k = order[oi]
        raw_sig = fx * radius[k] / zc[k]
        sig = min(max(raw_sig, SIGMA_MIN_PX), SIGMA_MAX_PX)
        clamped = sig != raw_sig
        x0, x1, y0, y1 = _bbox(uc[k], vc[k], sig, height, width)
        if x0 >= x1 or y0 >= y1:
            continue
        cut2 = (CUT_SIGMA * sig) ** 2
        inv2s2 = 1.0 / (2.0 * sig * sig)
        dxs = (np.arange(x0, x1) + 0.5) - uc[k]
        dys = (np.arange(y0, y1) + 0.5) - vc[k]
        d2 = dxs[None, :] ** 2 + dys[:, None] ** 2
        g = np.exp(-d2 * inv2s2)
        a_raw = opacity[k] * g
        a = np.minimum(a_raw, ALPHA_MAX)
        m = (d2 <= cut2) & (a >= ALPHA_EPS) & (sat[y0:y1, x0:x1] >= oi)
        if not m.any():
            continue
        not_clamped_a = m & (a_raw <= ALPHA_MAX)
        one_m = 1.0 - a
        tb = t_behind[y0:y1, x0:x1]
        t_i = np.where(m, tb / one_m, tb)
        w = np.where(m, a * t_i, 0.0)
        ws = wsum[y0:y1, x0:x1]
        inv_ws = np.where(m, 1.0 / np.maximum(ws, 1e-300), 0.0)

        dw = np.zeros_like(w)
        if need_geom:
            dc = d_color[y0:y1, x0:x1]
            d_col[k] += np.einsum("yxc,yx->c", dc, w * inv_ws)
            dw += np.einsum("yxc,yxc->yx", dc, color[k][None, None, :] - img_c[y0:y1, x0:x1]) * inv_ws
            dd = d_depth[y0:y1, x0:x1]
            dz_range = float(np.sum(dd * w * inv_ws))
            dw += dd * (rng[k] - img_d[y0:y1, x0:x1]) * inv_ws
        if need_feature:
            df = d_feat[y0:y1, x0:x1]
            d_fea[k] += np.einsum("yxf,yx->f", df, w * inv_ws)
            dw += np.einsum("yxf,yxf->yx", df, feature[k][None, None, :] - img_f[y0:y1, x0:x1]) * inv_ws

        if need_geom:
            sb = s_acc[y0:y1, x0:x1]
            da = np.where(m, t_i * dw - sb / one_m, 0.0)
            da_open = np.where(not_clamped_a, da, 0.0)
            d_opa[k] += float(np.sum(g * da_open))
            dg = opacity[k] * da_open
            du_acc = float(np.sum(dg * g * dxs[None, :] * (2.0 * inv2s2)))
            dv_acc = float(np.sum(dg * g * dys[:, None] * (2.0 * inv2s2)))
            dsig_acc = float(np.sum(dg * g * d2 * (2.0 * inv2s2) / sig))
            s_acc[y0:y1, x0:x1] = sb + np.where(m, w * dw, 0.0)

            zn = zc[k]
            dxn = du_acc * fx / zn
            dyn = dv_acc * fy / zn
            dzn = -du_acc * fx * cam[k, 0] / (zn * zn) - dv_acc * fy * cam[k, 1] / (zn * zn)
            if not clamped:
                d_rad[k] += dsig_acc * fx / zn
                dzn += -dsig_acc * fx * radius[k] / (zn * zn)
            grad_world = dxn * cam_r[0] + dyn * cam_r[1] + dzn * cam_r[2]
            if rng[k] > 0.0 and dz_range != 0.0:
                grad_world = grad_world + dz_range * (mu[k] - cam_pos) / rng[k]
            d_mu[k] += grad_world
        t_behind[y0:y1, x0:x1] = np.where(m, t_i, tb)
    return d_mu, d_col, d_rad, d_opa, d_fea


def entry_alpha(mu, radius, opacity, entry_ids, n_entries, cam_r, cam_pos,
                fx, fy, cx, cy, height, width):
    t = np.ones((n_entries, height, width))
    uc, vc, zc, rng, _ = _project(mu, cam_r, cam_pos, fx, fy, cx, cy)
    order = _depth_order(zc)
    for k in order:
        e = entry_ids[k]
        if e < 0:
            continue
        sig = min(max(fx * radius[k] / zc[k], SIGMA_MIN_PX), SIGMA_MAX_PX)
        x0, x1, y0, y1 = _bbox(uc[k], vc[k], sig, height, width)
        if x0 >= x1 or y0 >= y1:
            continue
        cut2 = (CUT_SIGMA * sig) ** 2
        inv2s2 = 1.0 / (2.0 * sig * sig)
        dxs = (np.arange(x0, x1) + 0.5) - uc[k]
        dys = (np.arange(y0, y1) + 0.5) - vc[k]
        d2 = dxs[None, :] ** 2 + dys[:, None] ** 2
        a = np.minimum(opacity[k] * np.exp(-d2 * inv2s2), ALPHA_MAX)
        m = (d2 <= cut2) & (a >= ALPHA_EPS)
        blk = t[e, y0:y1, x0:x1]
        t[e, y0:y1, x0:x1] = np.where(m, blk * (1.0 - a), blk)
    return 1.0 - t


def raycast(boxes, box_colors, box_ids, cam_r, cam_pos, fx, fy, cx, cy,
            height, width, light_dir, ambient, background):
    xs = (np.arange(width) + 0.5 - cx) / fx
    ys = (np.arange(height) + 0.5 - cy) / fy
    dirs = (cam_r[2][None, None, :]
            + xs[None, :, None] * cam_r[0][None, None, :]
            + ys[:, None, None] * cam_r[1][None, None, :])
    dirs = dirs / np.linalg.norm(dirs, axis=2, keepdims=True)

    best_t = np.full((height, width), RAY_FAR)
    best_b = np.full((height, width), -1, np.int64)
    best_axis = np.zeros((height, width), np.int64)
    best_sign = np.ones((height, width))

    for bi in range(boxes.shape[0]):
        t0 = np.full((height, width), RAY_EPS)
        t1 = np.full((height, width), RAY_FAR)
        axis = np.full((height, width), -1, np.int64)
        sign = np.ones((height, width))
        miss = np.zeros((height, width), bool)
        for ax in range(3):
            d = dirs[:, :, ax]
            o = cam_pos[ax]
            mn = boxes[bi, ax]
            mx = boxes[bi, ax + 3]
            par = np.abs(d) < 1e-12
            if o < mn or o > mx:
                miss |= par
            with np.errstate(divide="ignore", invalid="ignore"):
                ta = (mn - o) / d
                tb = (mx - o) / d
            lo = np.minimum(ta, tb)
            hi = np.maximum(ta, tb)
            s = np.where(d > 0.0, -1.0, 1.0)
            upd = ~par & (lo > t0)
            t0 = np.where(upd, lo, t0)
            axis = np.where(upd, ax, axis)
            sign = np.where(upd, s, sign)
            t1 = np.where(~par, np.minimum(t1, hi), t1)
        valid = ~miss & (axis >= 0) & (t0 <= t1)
        better = valid & (t0 < best_t)
        best_t = np.where(better, t0, best_t)
        best_b = np.where(better, bi, best_b)
        best_axis = np.where(better, axis, best_axis)
        best_sign = np.where(better, sign, best_sign)

    hit = best_b >= 0
    ndl = np.maximum(best_sign * light_dir[best_axis], 0.0)
    shade = ambient + (1.0 - ambient) * ndl
    cols = np.where(hit[:, :, None],
                    box_colors[np.maximum(best_b, 0)] * shade[:, :, None],
                    background[None, None, :])
    rng_img = np.where(hit, best_t, 0.0)
    id_img = np.where(hit, box_ids[np.maximum(best_b, 0)], 0).astype(np.int32)
    return cols, rng_img, id_img


def integrate_depth(cells, visits, depth_img, cam_r, cam_pos, fx, fy, cx, cy,
                    origin_x, origin_y, res, stride, min_h, max_h, agent_i, agent_j):
    h_img, w_img = depth_img.shape
    h_cells, w_cells = cells.shape
    pys, pxs = np.meshgrid(np.arange(0, h_img, stride), np.arange(0, w_img, stride),
                           indexing="ij")
    pys = pys.ravel()
    pxs = pxs.ravel()
    t = depth_img[pys, pxs]
    aa = (pxs + 0.5 - cx) / fx
    bb = (pys + 0.5 - cy) / fy
    dirs = (cam_r[2][None, :] + aa[:, None] * cam_r[0][None, :]
            + bb[:, None] * cam_r[1][None, :])
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pts = cam_pos[None, :] + t[:, None] * dirs
    keep = (t > 0.0) & (pts[:, 2] <= max_h)
    pts = pts[keep]
    hit_occ = pts[:, 2] >= min_h
    hi = np.floor((pts[:, 1] - origin_y) / res).astype(np.int64)
    hj = np.floor((pts[:, 0] - origin_x) / res).astype(np.int64)
    inb = (hi >= 0) & (hi < h_cells) & (hj >= 0) & (hj < w_cells)
    hi, hj, hit_occ = hi[inb], hj[inb], hit_occ[inb]
    if hi.size == 0:
        return cells

    # Batched Bresenham: advance every ray one plot per wave iteration.
    i0 = np.full(hi.shape, agent_i, np.int64)
    j0 = np.full(hj.shape, agent_j, np.int64)
    di = np.abs(hi - i0)
    dj = -np.abs(hj - j0)
    si = np.where(hi > i0, 1, -1)
    sj = np.where(hj > j0, 1, -1)
    err = di + dj
    alive = np.ones(hi.shape, bool)
    free_cells = []
    occ_cells = []
    visit_cells = []
    for _ in range(int(np.max(di - dj)) + 1):
        if not alive.any():
            break
        at_end = alive & (i0 == hi) & (j0 == hj)
        mid = alive & ~at_end
        visit_cells.append((i0[alive].copy(), j0[alive].copy()))
        free_cells.append((i0[mid], j0[mid]))
        free_cells.append((i0[at_end & ~hit_occ], j0[at_end & ~hit_occ]))
        occ_cells.append((i0[at_end & hit_occ], j0[at_end & hit_occ]))
        alive = mid
        e2 = 2 * err
        stepi = alive & (e2 >= dj)
        err = np.where(stepi, err + dj, err)
        i0 = np.where(stepi, i0 + si, i0)
        stepj = alive & (e2 <= di)
        err = np.where(stepj, err + di, err)
        j0 = np.where(stepj, j0 + sj, j0)

    fi = np.concatenate([c[0] for c in free_cells])
    fj = np.concatenate([c[1] for c in free_cells])
    unocc = cells[fi, fj] != CELL_OCCUPIED
    cells[fi[unocc], fj[unocc]] = CELL_FREE
    oi = np.concatenate([c[0] for c in occ_cells])
    oj = np.concatenate([c[1] for c in occ_cells])
    cells[oi, oj] = CELL_OCCUPIED
    vi = np.concatenate([c[0] for c in visit_cells])
    vj = np.concatenate([c[1] for c in visit_cells])
    np.add.at(visits, (vi, vj), 1)
    return cells


def _fmm_update(dist, state, i, j, h, w, res):
    a = math.inf
    if i > 0 and state[i - 1, j] == 2:
        a = dist[i - 1, j]
    if i < h - 1 and state[i + 1, j] == 2 and dist[i + 1, j] < a:
        a = dist[i + 1, j]
    b = math.inf
    if j > 0 and state[i, j - 1] == 2:
        b = dist[i, j - 1]
    if j < w - 1 and state[i, j + 1] == 2 and dist[i, j + 1] < b:
        b = dist[i, j + 1]
    if a == math.inf and b == math.inf:
        return math.inf
    if a == math.inf:
        return b + res
    if b == math.inf:
        return a + res
    diff = abs(a - b)
    if diff < res:
        return 0.5 * (a + b + math.sqrt(2.0 * res * res - diff * diff))
    return min(a, b) + res


FMM_SEED_RADIUS = 5


def fmm(trav, src_i, src_j, res):
    h, w = trav.shape
    dist = np.full((h, w), np.inf)
    state = np.zeros((h, w), np.uint8)
    if src_i < 0 or src_i >= h or src_j < 0 or src_j >= w or trav[src_i, src_j] == 0:
        return dist
    dist[src_i, src_j] = 0.0
    state[src_i, src_j] = 2
    r = FMM_SEED_RADIUS
    for di in range(-r, r + 1):
        for dj in range(-r, r + 1):
            if (di == 0 and dj == 0) or di * di + dj * dj > r * r:
                continue
            ni, nj = src_i + di, src_j + dj
            if not (0 <= ni < h and 0 <= nj < w):
                continue
            i0, i1 = min(ni, src_i), max(ni, src_i)
            j0, j1 = min(nj, src_j), max(nj, src_j)
            if not trav[i0:i1 + 1, j0:j1 + 1].all():
                continue
            dist[ni, nj] = res * math.hypot(di, dj)
            state[ni, nj] = 2

    heap = []
    seeds = np.argwhere(state == 2)
    for i, j in seeds:
        for ni, nj in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
            if ni < 0 or ni >= h or nj < 0 or nj >= w:
                continue
            if trav[ni, nj] == 0 or state[ni, nj] == 2:
                continue
            t = _fmm_update(dist, state, ni, nj, h, w, res)
            if t < dist[ni, nj]:
                dist[ni, nj] = t
                state[ni, nj] = 1
                heapq.heappush(heap, (t, ni * w + nj))

    while heap:
        key, idx = heapq.heappop(heap)
        i, j = divmod(idx, w)
        if state[i, j] == 2 or key > dist[i, j]:
            continue
        state[i, j] = 2
        for ni, nj in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
            if ni < 0 or ni >= h or nj < 0 or nj >= w:
                continue
            if trav[ni, nj] == 0 or state[ni, nj] == 2:
                continue
            t = _fmm_update(dist, state, ni, nj, h, w, res)
            if t < dist[ni, nj]:
                dist[ni, nj] = t
                state[ni, nj] = 1
                heapq.heappush(heap, (t, ni * w + nj))
    return dist
