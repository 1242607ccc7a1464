"""Pure-numpy implementations of the hot numeric kernels.

Every function here has a numba twin in ``numba_backend`` with identical
semantics; integer outputs are bit-identical, float outputs agree to
rounding noise. Keep the two files in sync.
"""

import numpy as np

TWO_PI = 2.0 * np.pi

# packing offsets for (ix, iy) -> int64 keys; coordinates must fit in +-2^20
_PACK_OFF = 1 << 20
_PACK_STRIDE = 1 << 21


def traverse_beams(ox, oy, ex, ey, width, height):
    """Mark every grid cell crossed by a beam from (ox,oy) to (ex,ey).

    Coordinates are integer cell indices, one beam per array entry. Returns a
    uint8 (height, width) mask with 1 on traversed cells (endpoint included).
    The traversal is the rounded parametric line: cell i of a beam with
    n = max(|dx|,|dy|) steps is (x0 + round(i*dx/n), y0 + round(i*dy/n)),
    ties rounding toward +inf, evaluated in exact integer arithmetic.
    """
    ox = np.asarray(ox, dtype=np.int64)
    oy = np.asarray(oy, dtype=np.int64)
    ex = np.asarray(ex, dtype=np.int64)
    ey = np.asarray(ey, dtype=np.int64)
    mask = np.zeros((height, width), dtype=np.uint8)
    if ox.size == 0:
        return mask
    dx = ex - ox
    dy = ey - oy
    n = np.maximum(np.maximum(np.abs(dx), np.abs(dy)), 1)
    counts = n + 1
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    beam = np.repeat(np.arange(ox.size), counts)
    i = np.arange(counts.sum(), dtype=np.int64) - starts[beam]
    nb = n[beam]
    cx = ox[beam] + (2 * i * dx[beam] + nb) // (2 * nb)
    cy = oy[beam] + (2 * i * dy[beam] + nb) // (2 * nb)
    mask[cy, cx] = 1
    return mask


def shell_sector_bins(px, py, cx, cy, radius, n_shells, n_sectors, fine_res):
    """Shell/sector occupancy histograms around each center.

    Points within ``radius`` of a center are dropped onto a ``fine_res`` grid
    anchored at that center; each occupied fine cell contributes one count to
    the (shell, sector) bin of its center point. Shells are half-open
    [r_{i-1}, r_i) with r_i = i*radius/n_shells; sector 0 starts on +x,
    counterclockwise. Fine cells whose center lands at or beyond ``radius``
    are dropped. Returns int64 (n_centers, n_shells*n_sectors).
    """
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    n_centers = len(cx)
    out = np.zeros((n_centers, n_shells * n_sectors), dtype=np.int64)
    sector_width = TWO_PI / n_sectors
    r2 = radius * radius
    for c in range(n_centers):
        rx = px - cx[c]
        ry = py - cy[c]
        near = rx * rx + ry * ry < r2
        if not near.any():
            continue
        fx = np.floor(rx[near] / fine_res).astype(np.int64)
        fy = np.floor(ry[near] / fine_res).astype(np.int64)
        keys = np.unique((fx + _PACK_OFF) * _PACK_STRIDE + (fy + _PACK_OFF))
        ufx = keys // _PACK_STRIDE - _PACK_OFF
        ufy = keys % _PACK_STRIDE - _PACK_OFF
        ccx = (ufx + 0.5) * fine_res
        ccy = (ufy + 0.5) * fine_res
        d = np.sqrt(ccx * ccx + ccy * ccy)
        shell = np.floor(d * n_shells / radius).astype(np.int64)
        ang = np.arctan2(ccy, ccx)
        ang = np.where(ang < 0.0, ang + TWO_PI, ang)
        sec = np.floor(ang / sector_width).astype(np.int64)
        sec = np.where(sec >= n_sectors, sec - n_sectors, sec)
        ok = shell < n_shells
        np.add.at(out[c], shell[ok] * n_sectors + sec[ok], 1)
    return out


def lof_scores(x, y, k):
    """Density-ratio outlier score per point (k-neighbor variant).

    Neighbors are the k nearest by (distance, index); reachability of p from
    o is max(o's k-th neighbor distance, |p-o|); local reachability density
    is the reciprocal mean reachability; the score is the mean neighbor/self
    density ratio. Scores near 1 mean inlier, >> 1 outlier.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    dx = x[:, None] - x[None, :]
    dy = y[:, None] - y[None, :]
    dist = np.sqrt(dx * dx + dy * dy)
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1, kind="stable")
    nbrs = order[:, :k]
    rows = np.arange(n)
    kdist = dist[rows, nbrs[:, k - 1]]
    reach = np.maximum(kdist[nbrs], dist[rows[:, None], nbrs])
    lrd = k / reach.sum(axis=1)
    return lrd[nbrs].sum(axis=1) / (k * lrd)


def histogram_intersection(a, b):
    """Sum over distinct keys of min(multiplicity in a, multiplicity in b).

    Both inputs are int64 key arrays sorted ascending (duplicates allowed).
    """
    ka, ca = np.unique(a, return_counts=True)
    kb, cb = np.unique(b, return_counts=True)
    _, ia, ib = np.intersect1d(ka, kb, assume_unique=True, return_indices=True)
    return int(np.minimum(ca[ia], cb[ib]).sum())


def db_self_hamming(dbx, dby, dbw, half_window):
    """Per-feature min Hamming distance to any other feature in its window.

    Window is the closed box [-half_window, half_window]^2 around the
    feature. Features with an empty window get -1.
    """
    dbx = np.asarray(dbx, dtype=np.float64)
    dby = np.asarray(dby, dtype=np.float64)
    dbw = np.asarray(dbw, dtype=np.uint64)
    n = dbx.size
    out = np.full(n, -1, dtype=np.int64)
    for j in range(n):
        inside = (np.abs(dbx - dbx[j]) <= half_window) & (np.abs(dby - dby[j]) <= half_window)
        inside[j] = False
        if inside.any():
            ham = np.bitwise_count(dbw[inside] ^ dbw[j]).astype(np.int64)
            out[j] = ham.min()
    return out


def nn_d_scores(qx, qy, qw, dbx, dby, dbw, half_window):
    """Nearest-neighbor distance-ratio anomaly score per query feature.

    For each query feature: candidates are database features inside the
    closed window around the query position; the match is the candidate with
    minimum word Hamming distance (ties: nearer position, then lower index);
    the score is that distance divided by the match's own min Hamming to its
    windowed database neighbors. Empty candidate set -> inf; zero denominator
    -> 0 if the numerator is zero else inf.
    """
    qx = np.asarray(qx, dtype=np.float64)
    qy = np.asarray(qy, dtype=np.float64)
    qw = np.asarray(qw, dtype=np.uint64)
    dbx = np.asarray(dbx, dtype=np.float64)
    dby = np.asarray(dby, dtype=np.float64)
    dbw = np.asarray(dbw, dtype=np.uint64)
    den = db_self_hamming(dbx, dby, dbw, half_window)
    nq = qx.size
    out = np.empty(nq, dtype=np.float64)
    for i in range(nq):
        inside = (np.abs(dbx - qx[i]) <= half_window) & (np.abs(dby - qy[i]) <= half_window)
        cand = np.flatnonzero(inside)
        if cand.size == 0:
            out[i] = np.inf
            continue
        ham = np.bitwise_count(dbw[cand] ^ qw[i]).astype(np.int64)
        num = ham.min()
        tied = cand[ham == num]
        d2 = (dbx[tied] - qx[i]) ** 2 + (dby[tied] - qy[i]) ** 2
        jstar = tied[np.lexsort((tied, d2))[0]]
        d = den[jstar]
        if d <= 0:
            out[i] = 0.0 if num == 0 else np.inf
        else:
            out[i] = num / d
    return out


def grow_rooms(free, seed_ix, seed_iy):
    """Grow one maximal free-cell rectangle per seed; accumulate membership.

    ``free`` is a uint8 (H, W) mask of unoccupied cells. A rectangle starts
    at its seed cell and expands one cell strip at a time, cycling sides
    (-x, +x, -y, +y), as long as the new strip is fully free and in bounds.
    Returns int64 (H, W) counts of how many rectangles contain each cell.
    """
    h, w = free.shape
    member = np.zeros((h, w), dtype=np.int64)
    for s in range(len(seed_ix)):
        x0 = x1 = int(seed_ix[s])
        y0 = y1 = int(seed_iy[s])
        fails = 0
        side = 0
        while fails < 4:
            grew = False
            if side == 0 and x0 > 0 and free[y0 : y1 + 1, x0 - 1].all():
                x0 -= 1
                grew = True
            elif side == 1 and x1 < w - 1 and free[y0 : y1 + 1, x1 + 1].all():
                x1 += 1
                grew = True
            elif side == 2 and y0 > 0 and free[y0 - 1, x0 : x1 + 1].all():
                y0 -= 1
                grew = True
            elif side == 3 and y1 < h - 1 and free[y1 + 1, x0 : x1 + 1].all():
                y1 += 1
                grew = True
            fails = 0 if grew else fails + 1
            side = (side + 1) % 4
        member[y0 : y1 + 1, x0 : x1 + 1] += 1
    return member


def orientation_entropies(x, y, bin_width, n_angles):
    """Summed projection-histogram entropy for each candidate rotation.

    For angle a (degrees 0..n_angles-1) the points are rotated by -a and
    the x and y coordinates histogrammed into ``bin_width`` bins on the
    absolute lattice (edges at integer multiples of the width, so bin
    membership does not depend on where the sampled extremes fall); the
    output is the sum of the two Shannon entropies.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    out = np.empty(n_angles, dtype=np.float64)
    for a in range(n_angles):
        th = np.radians(float(a))
        c = np.cos(th)
        s = np.sin(th)
        px = x * c + y * s
        py = -x * s + y * c
        total = 0.0
        for proj in (px, py):
            bins = np.floor(proj / bin_width).astype(np.int64)
            bins -= bins.min()
            cnt = np.bincount(bins)
            p = cnt[cnt > 0] / n
            total -= (p * np.log(p)).sum()
        out[a] = total
    return out


def raytrace_rects(ox, oy, ex, ey, rects):
    """First hit parameter of each beam segment against a set of boxes.

    Beams run from (ox,oy) to (ex,ey); ``rects`` is float64 (K, 4) rows of
    (xmin, ymin, xmax, ymax). Returns the smallest t in [0, 1) at which a
    beam enters a box, or inf for a miss. Entries starting inside a box
    (entry parameter < 0) do not count as hits.
    """
    ox = np.asarray(ox, dtype=np.float64)
    oy = np.asarray(oy, dtype=np.float64)
    ex = np.asarray(ex, dtype=np.float64)
    ey = np.asarray(ey, dtype=np.float64)
    dx = ex - ox
    dy = ey - oy
    best = np.full(ox.shape, np.inf)
    for r in range(rects.shape[0]):
        xmin, ymin, xmax, ymax = rects[r]
        movx = dx != 0.0
        safe_dx = np.where(movx, dx, 1.0)
        tx1 = np.where(movx, (xmin - ox) / safe_dx, -np.inf)
        tx2 = np.where(movx, (xmax - ox) / safe_dx, np.inf)
        okx = movx | ((ox >= xmin) & (ox <= xmax))
        movy = dy != 0.0
        safe_dy = np.where(movy, dy, 1.0)
        ty1 = np.where(movy, (ymin - oy) / safe_dy, -np.inf)
        ty2 = np.where(movy, (ymax - oy) / safe_dy, np.inf)
        oky = movy | ((oy >= ymin) & (oy <= ymax))
        tlo = np.maximum(np.minimum(tx1, tx2), np.minimum(ty1, ty2))
        thi = np.minimum(np.maximum(tx1, tx2), np.maximum(ty1, ty2))
        hit = okx & oky & (tlo <= thi) & (tlo >= 0.0) & (tlo < 1.0)
        best = np.where(hit & (tlo < best), tlo, best)
    return best
