"""The numba and numpy kernel paths must agree bit for bit."""
import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from risk import kernels

coords = hnp.arrays(np.float64, st.integers(1, 300),
                    elements=st.floats(0.0, 1.0, allow_nan=False))


@given(st.lists(st.tuples(st.integers(0, (1 << 20) - 1), st.integers(0, (1 << 20) - 1)),
                min_size=1, max_size=50))
def test_morton_paths_agree_and_invert(cells):
    ix = np.array([c[0] for c in cells], np.int64)
    iy = np.array([c[1] for c in cells], np.int64)
    a = kernels.morton_nb(ix, iy)
    b = kernels.morton_np(ix, iy)
    assert np.array_equal(a, b)
    for code, x, y in zip(a.tolist(), ix.tolist(), iy.tolist()):
        assert kernels.demorton(code) == (x, y)


def test_morton_digit_layout():
    # base-4 digit = 2 * ybit + xbit
    assert kernels.morton_codes(np.array([1]), np.array([0]))[0] == 1
    assert kernels.morton_codes(np.array([0]), np.array([1]))[0] == 2
    assert kernels.morton_codes(np.array([1]), np.array([1]))[0] == 3


def test_grid_indices_close_the_top_cell():
    assert kernels.grid_indices(np.array([0.0, 0.5, 1.0]), 1).tolist() == [0, 1, 1]
    assert kernels.grid_indices(np.array([0.2499999]), 2).tolist() == [0]


@given(coords, st.integers(1, 8))
def test_leaves_agree(t, k_max):
    ty = np.roll(t, 1)
    codes = np.sort(kernels.morton_np(kernels.grid_indices(t, kernels.DEPTH_CAP),
                                      kernels.grid_indices(ty, kernels.DEPTH_CAP)))
    a = kernels.leaves_nb(codes, k_max, kernels.DEPTH_CAP)
    b = kernels.leaves_np(codes, k_max, kernels.DEPTH_CAP)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)
    lv, _, lo, hi = a
    assert lv.min() >= 1
    assert (hi - lo).sum() == t.size
    assert np.all(lo[1:] == hi[:-1])


@given(coords, st.integers(1, 12), st.integers(0, 2**31))
def test_knn_agree(t, k, seed):
    rng = np.random.default_rng(seed)
    ys = rng.random(t.size)
    ranks = rng.permutation(t.size).astype(np.int64)
    m = 5
    cx, cy = rng.random(m), rng.random(m)
    ex = rng.integers(-1, t.size, m).astype(np.int64)
    a = kernels.knn_nb(t, ys, ranks, cx, cy, ex, k)
    b = kernels.knn_np(t, ys, ranks, cx, cy, ex, k)
    assert np.array_equal(a, b)


def test_knn_matches_full_sort():
    rng = np.random.default_rng(4)
    xs, ys = rng.random(500), rng.random(500)
    ranks = np.arange(500, dtype=np.int64)
    out = kernels.knn(xs, ys, ranks, np.array([0.3]), np.array([0.6]), np.array([-1]), 10)[0]
    d = np.sqrt((xs - 0.3) ** 2 + (ys - 0.6) ** 2)
    assert out.tolist() == sorted(range(500), key=lambda i: (d[i], i))[:10]


@given(st.integers(1, 6), st.data())
def test_cover_cells_agree(d, data):
    n = 1 << d
    i_lo = data.draw(st.integers(0, n - 1))
    i_hi = data.draw(st.integers(i_lo, n - 1))
    j_lo = data.draw(st.integers(0, n - 1))
    j_hi = data.draw(st.integers(j_lo, n - 1))
    a = kernels.cover_cells_nb(i_lo, i_hi, j_lo, j_hi, d)
    b = kernels.cover_cells_np(i_lo, i_hi, j_lo, j_hi, d)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    pairs = list(zip(a[0].tolist(), a[1].tolist()))
    assert len(pairs) == len(set(pairs))


def test_warm_up_runs():
    kernels.warm_up()
