"""Numba-compiled twins of the kernels in ``numpy_backend``.

Same contracts, same semantics; see the numpy module for the full
docstrings. Integer results are bit-identical across the two backends,
float results agree to rounding noise.
"""

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * np.pi

PACK_OFF = np.int64(1 << 20)
PACK_STRIDE = np.int64(1 << 21)

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)
_U1 = np.uint64(1)
_U2 = np.uint64(2)
_U4 = np.uint64(4)
_U56 = np.uint64(56)


@njit(cache=True)
def _popcount64(v):
    v = v - ((v >> _U1) & _M1)
    v = (v & _M2) + ((v >> _U2) & _M2)
    v = (v + (v >> _U4)) & _M4
    return np.int64((v * _H01) >> _U56)


@njit(cache=True)
def traverse_beams(ox, oy, ex, ey, width, height):
    mask = np.zeros((height, width), dtype=np.uint8)
    for b in range(ox.size):
        dx = ex[b] - ox[b]
        dy = ey[b] - oy[b]
        n = max(abs(dx), abs(dy))
        if n < 1:
            n = 1
        for i in range(n + 1):
            cx = ox[b] + (2 * i * dx + n) // (2 * n)
            cy = oy[b] + (2 * i * dy + n) // (2 * n)
            mask[cy, cx] = 1
    return mask


@njit(cache=True)
def shell_sector_bins(px, py, cx, cy, radius, n_shells, n_sectors, fine_res):
    n_centers = cx.size
    out = np.zeros((n_centers, n_shells * n_sectors), dtype=np.int64)
    sector_width = TWO_PI / n_sectors
    r2 = radius * radius
    n_pts = px.size
    keys = np.empty(n_pts, dtype=np.int64)
    for c in range(n_centers):
        m = 0
        for p in range(n_pts):
            rx = px[p] - cx[c]
            ry = py[p] - cy[c]
            if rx * rx + ry * ry < r2:
                fx = np.int64(np.floor(rx / fine_res))
                fy = np.int64(np.floor(ry / fine_res))
                keys[m] = (fx + PACK_OFF) * PACK_STRIDE + (fy + PACK_OFF)
                m += 1
        if m == 0:
            continue
        sub = np.sort(keys[:m])
        prev = np.int64(-1)
        for t in range(m):
            kk = sub[t]
            if kk == prev:
                continue
            prev = kk
            ufx = kk // PACK_STRIDE - PACK_OFF
            ufy = kk % PACK_STRIDE - PACK_OFF
            ccx = (ufx + 0.5) * fine_res
            ccy = (ufy + 0.5) * fine_res
            d = np.sqrt(ccx * ccx + ccy * ccy)
            shell = np.int64(np.floor(d * n_shells / radius))
            if shell >= n_shells:
                continue
            ang = np.arctan2(ccy, ccx)
            if ang < 0.0:
                ang += TWO_PI
            sec = np.int64(np.floor(ang / sector_width))
            if sec >= n_sectors:
                sec -= n_sectors
            out[c, shell * n_sectors + sec] += 1
    return out


@njit(cache=True)
def lof_scores(x, y, k):
    n = x.size
    nbrs = np.empty((n, k), dtype=np.int64)
    kdist = np.empty(n, dtype=np.float64)
    bd = np.empty(k, dtype=np.float64)
    for i in range(n):
        for m in range(k):
            bd[m] = np.inf
            nbrs[i, m] = -1
        for j in range(n):
            if j == i:
                continue
            dxx = x[i] - x[j]
            dyy = y[i] - y[j]
            d = np.sqrt(dxx * dxx + dyy * dyy)
            if d < bd[k - 1]:
                pos = k - 1
                while pos > 0 and d < bd[pos - 1]:
                    bd[pos] = bd[pos - 1]
                    nbrs[i, pos] = nbrs[i, pos - 1]
                    pos -= 1
                bd[pos] = d
                nbrs[i, pos] = j
        kdist[i] = bd[k - 1]
    lrd = np.empty(n, dtype=np.float64)
    for i in range(n):
        total = 0.0
        for m in range(k):
            o = nbrs[i, m]
            dxx = x[i] - x[o]
            dyy = y[i] - y[o]
            d = np.sqrt(dxx * dxx + dyy * dyy)
            total += kdist[o] if kdist[o] > d else d
        lrd[i] = k / total
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        total = 0.0
        for m in range(k):
            total += lrd[nbrs[i, m]]
        out[i] = total / (k * lrd[i])
    return out


@njit(cache=True)
def histogram_intersection(a, b):
    i = 0
    j = 0
    total = 0
    na = a.size
    nb = b.size
    while i < na and j < nb:
        if a[i] < b[j]:
            i += 1
        elif b[j] < a[i]:
            j += 1
        else:
            v = a[i]
            ca = 0
            while i < na and a[i] == v:
                ca += 1
                i += 1
            cb = 0
            while j < nb and b[j] == v:
                cb += 1
                j += 1
            total += min(ca, cb)
    return total


@njit(cache=True)
def db_self_hamming(dbx, dby, dbw, half_window):
    n = dbx.size
    out = np.full(n, -1, dtype=np.int64)
    for j in range(n):
        best = np.int64(-1)
        for i in range(n):
            if i == j:
                continue
            if abs(dbx[i] - dbx[j]) <= half_window and abs(dby[i] - dby[j]) <= half_window:
                h = _popcount64(dbw[i] ^ dbw[j])
                if best < 0 or h < best:
                    best = h
        out[j] = best
    return out


@njit(cache=True)
def nn_d_scores(qx, qy, qw, dbx, dby, dbw, half_window):
    den = db_self_hamming(dbx, dby, dbw, half_window)
    nq = qx.size
    ndb = dbx.size
    out = np.empty(nq, dtype=np.float64)
    for i in range(nq):
        best_h = np.int64(-1)
        best_d2 = np.inf
        best_j = -1
        for j in range(ndb):
            if abs(dbx[j] - qx[i]) <= half_window and abs(dby[j] - qy[i]) <= half_window:
                h = _popcount64(dbw[j] ^ qw[i])
                if best_j < 0 or h < best_h:
                    best_h = h
                    best_j = j
                    ddx = dbx[j] - qx[i]
                    ddy = dby[j] - qy[i]
                    best_d2 = ddx * ddx + ddy * ddy
                elif h == best_h:
                    ddx = dbx[j] - qx[i]
                    ddy = dby[j] - qy[i]
                    d2 = ddx * ddx + ddy * ddy
                    if d2 < best_d2:
                        best_d2 = d2
                        best_j = j
        if best_j < 0:
            out[i] = np.inf
        elif den[best_j] <= 0:
            out[i] = 0.0 if best_h == 0 else np.inf
        else:
            out[i] = best_h / den[best_j]
    return out


@njit(cache=True)
def grow_rooms(free, seed_ix, seed_iy):
    h, w = free.shape
    member = np.zeros((h, w), dtype=np.int64)
    for s in range(seed_ix.size):
        x0 = seed_ix[s]
        x1 = seed_ix[s]
        y0 = seed_iy[s]
        y1 = seed_iy[s]
        fails = 0
        side = 0
        while fails < 4:
            grew = False
            if side == 0 and x0 > 0:
                ok = True
                for yy in range(y0, y1 + 1):
                    if free[yy, x0 - 1] == 0:
                        ok = False
                        break
                if ok:
                    x0 -= 1
                    grew = True
            elif side == 1 and x1 < w - 1:
                ok = True
                for yy in range(y0, y1 + 1):
                    if free[yy, x1 + 1] == 0:
                        ok = False
                        break
                if ok:
                    x1 += 1
                    grew = True
            elif side == 2 and y0 > 0:
                ok = True
                for xx in range(x0, x1 + 1):
                    if free[y0 - 1, xx] == 0:
                        ok = False
                        break
                if ok:
                    y0 -= 1
                    grew = True
            elif side == 3 and y1 < h - 1:
                ok = True
                for xx in range(x0, x1 + 1):
                    if free[y1 + 1, xx] == 0:
                        ok = False
                        break
                if ok:
                    y1 += 1
                    grew = True
            fails = 0 if grew else fails + 1
            side = (side + 1) % 4
        for yy in range(y0, y1 + 1):
            for xx in range(x0, x1 + 1):
                member[yy, xx] += 1
    return member


@njit(cache=True)
def orientation_entropies(x, y, bin_width, n_angles):
    n = x.size
    out = np.empty(n_angles, dtype=np.float64)
    px = np.empty(n, dtype=np.float64)
    py = np.empty(n, dtype=np.float64)
    bins = np.empty(n, dtype=np.int64)
    for a in range(n_angles):
        th = math.radians(float(a))
        c = np.cos(th)
        s = np.sin(th)
        for i in range(n):
            px[i] = x[i] * c + y[i] * s
            py[i] = -x[i] * s + y[i] * c
        total = 0.0
        for proj in (px, py):
            for i in range(n):
                bins[i] = np.int64(np.floor(proj[i] / bin_width))
            sb = np.sort(bins)
            run = 1
            for t in range(1, n):
                if sb[t] == sb[t - 1]:
                    run += 1
                else:
                    p = run / n
                    total -= p * np.log(p)
                    run = 1
            p = run / n
            total -= p * np.log(p)
        out[a] = total
    return out


@njit(cache=True)
def raytrace_rects(ox, oy, ex, ey, rects):
    nb = ox.size
    best = np.full(nb, np.inf)
    for b in range(nb):
        dx = ex[b] - ox[b]
        dy = ey[b] - oy[b]
        for r in range(rects.shape[0]):
            xmin = rects[r, 0]
            ymin = rects[r, 1]
            xmax = rects[r, 2]
            ymax = rects[r, 3]
            if dx != 0.0:
                t1 = (xmin - ox[b]) / dx
                t2 = (xmax - ox[b]) / dx
                txlo = min(t1, t2)
                txhi = max(t1, t2)
            elif xmin <= ox[b] <= xmax:
                txlo = -np.inf
                txhi = np.inf
            else:
                continue
            if dy != 0.0:
                t1 = (ymin - oy[b]) / dy
                t2 = (ymax - oy[b]) / dy
                tylo = min(t1, t2)
                tyhi = max(t1, t2)
            elif ymin <= oy[b] <= ymax:
                tylo = -np.inf
                tyhi = np.inf
            else:
                continue
            tlo = max(txlo, tylo)
            thi = min(txhi, tyhi)
            if tlo <= thi and 0.0 <= tlo < 1.0 and tlo < best[b]:
                best[b] = tlo
    return best
