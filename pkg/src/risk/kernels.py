"""Hot numeric kernels.

Each kernel has a numba implementation (``*_nb``) and a pure-numpy one
(``*_np``).  The public names resolve to one of them at import time according
to :data:`risk._jit.USE_NUMBA`; both variants stay importable so tests and the
benchmark can compare them directly.

Grid conventions shared by every kernel:

* a normalized coordinate ``t`` in ``[0, 1]`` maps to the level-``L`` cell
  index ``min(floor(t * 2**L), 2**L - 1)`` (half-open cells, the top/right
  cells closed);
* a level-``L`` cell ``(a, b)`` has Morton code ``spread(a) | spread(b) << 1``,
  so base-4 digit ``l`` of the code equals ``2 * ybit + xbit``.
"""
import numpy as np

from ._jit import USE_NUMBA, njit

DEPTH_CAP = 20
GRID = 1 << DEPTH_CAP


# --------------------------------------------------------------------------
# Morton codes

def _spread_np(v):
    v = v.astype(np.uint64) & np.uint64(0xFFFFFFFF)
    v = (v | (v << np.uint64(16))) & np.uint64(0x0000FFFF0000FFFF)
    v = (v | (v << np.uint64(8))) & np.uint64(0x00FF00FF00FF00FF)
    v = (v | (v << np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    v = (v | (v << np.uint64(2))) & np.uint64(0x3333333333333333)
    v = (v | (v << np.uint64(1))) & np.uint64(0x5555555555555555)
    return v


def morton_np(ix, iy):
    ix = np.asarray(ix, dtype=np.int64)
    iy = np.asarray(iy, dtype=np.int64)
    return (_spread_np(ix) | (_spread_np(iy) << np.uint64(1))).astype(np.int64)


@njit(cache=True)
def _spread_nb(v):
    v &= 0xFFFFFFFF
    v = (v | (v << 16)) & 0x0000FFFF0000FFFF
    v = (v | (v << 8)) & 0x00FF00FF00FF00FF
    v = (v | (v << 4)) & 0x0F0F0F0F0F0F0F0F
    v = (v | (v << 2)) & 0x3333333333333333
    v = (v | (v << 1)) & 0x5555555555555555
    return v


@njit(cache=True)
def morton_nb(ix, iy):
    n = ix.size
    out = np.empty(n, dtype=np.int64)
    for k in range(n):
        out[k] = _spread_nb(ix[k]) | (_spread_nb(iy[k]) << 1)
    return out


def demorton(code):
    """Inverse of the Morton interleave for a single Python int."""
    a = b = 0
    bit = 0
    while code:
        a |= (code & 1) << bit
        b |= ((code >> 1) & 1) << bit
        code >>= 2
        bit += 1
    return a, b


def grid_indices(t, level):
    """Cell indices of normalized coordinates ``t`` (array) at ``level``."""
    n = 1 << level
    idx = np.floor(np.asarray(t, dtype=np.float64) * float(n)).astype(np.int64)
    return np.minimum(idx, n - 1)


# --------------------------------------------------------------------------
# quadtree leaves over Morton-sorted codes

@njit(cache=True)
def leaves_nb(codes, k_max, depth_cap):
    n = codes.size
    cap = 64
    o_lvl = np.empty(cap, np.int64)
    o_code = np.empty(cap, np.int64)
    o_lo = np.empty(cap, np.int64)
    o_hi = np.empty(cap, np.int64)
    m = 0
    s_lvl = np.empty(4 * depth_cap + 8, np.int64)
    s_code = np.empty(4 * depth_cap + 8, np.int64)
    s_lo = np.empty(4 * depth_cap + 8, np.int64)
    s_hi = np.empty(4 * depth_cap + 8, np.int64)
    sp = 0
    s_lvl[0] = 0
    s_code[0] = 0
    s_lo[0] = 0
    s_hi[0] = n
    sp = 1
    bounds = np.empty(5, np.int64)
    while sp > 0:
        sp -= 1
        lvl = s_lvl[sp]
        code = s_code[sp]
        lo = s_lo[sp]
        hi = s_hi[sp]
        if lvl >= 1 and (hi - lo <= k_max or lvl == depth_cap):
            if m == cap:
                cap *= 2
                o_lvl = _grow(o_lvl, cap)
                o_code = _grow(o_code, cap)
                o_lo = _grow(o_lo, cap)
                o_hi = _grow(o_hi, cap)
            o_lvl[m] = lvl
            o_code[m] = code
            o_lo[m] = lo
            o_hi[m] = hi
            m += 1
            continue
        shift = 2 * (depth_cap - lvl - 1)
        bounds[0] = lo
        bounds[4] = hi
        for c in range(1, 4):
            key = ((code << 2) + c) << shift
            bounds[c] = lo + np.searchsorted(codes[lo:hi], key)
        # push in reverse so children pop in digit order
        for c in range(3, -1, -1):
            s_lvl[sp] = lvl + 1
            s_code[sp] = (code << 2) + c
            s_lo[sp] = bounds[c]
            s_hi[sp] = bounds[c + 1]
            sp += 1
    return o_lvl[:m], o_code[:m], o_lo[:m], o_hi[:m]


@njit(cache=True)
def _grow(a, cap):
    b = np.empty(cap, a.dtype)
    b[: a.size] = a
    return b


def leaves_np(codes, k_max, depth_cap):
    codes = np.asarray(codes, dtype=np.int64)
    out = []
    stack = [(0, 0, 0, codes.size)]
    while stack:
        lvl, code, lo, hi = stack.pop()
        if lvl >= 1 and (hi - lo <= k_max or lvl == depth_cap):
            out.append((lvl, code, lo, hi))
            continue
        shift = 2 * (depth_cap - lvl - 1)
        keys = (((code << 2) + np.arange(1, 4, dtype=np.int64)) << shift)
        inner = lo + np.searchsorted(codes[lo:hi], keys)
        bounds = [lo, *inner.tolist(), hi]
        for c in range(3, -1, -1):
            stack.append((lvl + 1, (code << 2) + c, bounds[c], bounds[c + 1]))
    if not out:
        empty = np.empty(0, np.int64)
        return empty, empty, empty, empty
    arr = np.array(out, dtype=np.int64)
    return arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy(), arr[:, 3].copy()


# --------------------------------------------------------------------------
# k nearest neighbours by (distance, rank)

@njit(cache=True)
def knn_nb(xs, ys, ranks, cx, cy, exclude, k):
    n = xs.size
    m = cx.size
    out = np.full((m, k), -1, np.int64)
    bd = np.empty(k, np.float64)
    br = np.empty(k, np.int64)
    bi = np.empty(k, np.int64)
    for c in range(m):
        px = cx[c]
        py = cy[c]
        ex = exclude[c]
        cnt = 0
        for j in range(n):
            if j == ex:
                continue
            dx = xs[j] - px
            dy = ys[j] - py
            dd = np.sqrt(dx * dx + dy * dy)
            rj = ranks[j]
            if cnt == k:
                last = k - 1
                if dd > bd[last] or (dd == bd[last] and rj > br[last]):
                    continue
                pos = last
            else:
                pos = cnt
                cnt += 1
            while pos > 0 and (bd[pos - 1] > dd or (bd[pos - 1] == dd and br[pos - 1] > rj)):
                bd[pos] = bd[pos - 1]
                br[pos] = br[pos - 1]
                bi[pos] = bi[pos - 1]
                pos -= 1
            bd[pos] = dd
            br[pos] = rj
            bi[pos] = j
        for t in range(cnt):
            out[c, t] = bi[t]
    return out


def knn_np(xs, ys, ranks, cx, cy, exclude, k):
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    ranks = np.asarray(ranks, dtype=np.int64)
    m = len(cx)
    out = np.full((m, k), -1, np.int64)
    if k == 0:
        return out
    for c in range(m):
        dx = xs - cx[c]
        dy = ys - cy[c]
        dd = np.sqrt(dx * dx + dy * dy)
        keep = np.ones(xs.size, dtype=bool)
        if exclude[c] >= 0:
            keep[exclude[c]] = False
        cand = np.nonzero(keep)[0]
        kk = min(k, cand.size)
        if kk == 0:
            continue
        d_c = dd[cand]
        kth = np.partition(d_c, kk - 1)[kk - 1]
        cand = cand[d_c <= kth]
        order = np.lexsort((ranks[cand], dd[cand]))[:kk]
        out[c, :kk] = cand[order]
    return out


# --------------------------------------------------------------------------
# cover cells: every cell of levels 1..d over an index rectangle, first-seen order

@njit(cache=True)
def cover_cells_nb(i_lo, i_hi, j_lo, j_hi, d):
    total = 0
    for lv in range(1, d + 1):
        s = d - lv
        total += ((i_hi >> s) - (i_lo >> s) + 1) * ((j_hi >> s) - (j_lo >> s) + 1)
    levels = np.empty(total, np.int64)
    codes = np.empty(total, np.int64)
    m = 0
    for i in range(i_lo, i_hi + 1):
        for j in range(j_lo, j_hi + 1):
            for lv in range(1, d + 1):
                s = d - lv
                mask = (1 << s) - 1
                if (i == i_lo or (i & mask) == 0) and (j == j_lo or (j & mask) == 0):
                    a = i >> s
                    b = j >> s
                    code = 0
                    for bit in range(lv):
                        code |= ((a >> bit) & 1) << (2 * bit)
                        code |= ((b >> bit) & 1) << (2 * bit + 1)
                    levels[m] = lv
                    codes[m] = code
                    m += 1
    return levels, codes


def cover_cells_np(i_lo, i_hi, j_lo, j_hi, d):
    ii, jj = np.meshgrid(np.arange(i_lo, i_hi + 1, dtype=np.int64),
                         np.arange(j_lo, j_hi + 1, dtype=np.int64), indexing="ij")
    ii = ii.ravel()
    jj = jj.ravel()
    cell_order = []
    lv_all = []
    code_all = []
    for lv in range(1, d + 1):
        s = d - lv
        mask = (1 << s) - 1
        first = ((ii == i_lo) | ((ii & mask) == 0)) & ((jj == j_lo) | ((jj & mask) == 0))
        pos = np.nonzero(first)[0]
        cell_order.append(pos)
        lv_all.append(np.full(pos.size, lv, np.int64))
        code_all.append(morton_np(ii[pos] >> s, jj[pos] >> s))
    pos = np.concatenate(cell_order)
    lv = np.concatenate(lv_all)
    codes = np.concatenate(code_all)
    order = np.lexsort((lv, pos))
    return lv[order], codes[order]


if USE_NUMBA:
    morton = morton_nb
    leaves = leaves_nb
    knn = knn_nb
    cover_cells = cover_cells_nb
else:
    morton = morton_np
    leaves = leaves_np
    knn = knn_np
    cover_cells = cover_cells_np


def morton_codes(ix, iy):
    return morton(np.ascontiguousarray(ix, dtype=np.int64),
                  np.ascontiguousarray(iy, dtype=np.int64))


def warm_up():
    """Run each dispatched kernel once on tiny inputs so the first real call
    does not pay compilation or cache-loading cost."""
    one = np.zeros(1, np.int64)
    xy = np.zeros(1, np.float64)
    morton_codes(one, one)
    leaves(one, 1, DEPTH_CAP)
    knn(xy, xy, one, xy, xy, np.full(1, -1, np.int64), 1)
    cover_cells(0, 0, 0, 0, 1)
