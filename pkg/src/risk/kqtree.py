"""Per-keyword kNN quadtrees (kQ-trees).

A kQ-tree is a capacity-``k_max`` quadtree over one keyword group, flattened
into one :class:`PlainEntry` per non-empty leaf.  Cells are addressed by base-4
path strings; digit ``2*ybit + xbit`` names the child (0 bottom-left,
1 bottom-right, 2 top-left, 3 top-right).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import OutOfBounds, OutOfCell
from .geo import GeoObject, Point, distance
from .kernels import DEPTH_CAP

_DIGITS = "0123"


# --------------------------------------------------------------------------
# paths

def code_to_path(level: int, code: int) -> str:
    return "".join(_DIGITS[(code >> (2 * (level - 1 - i))) & 3] for i in range(level))


def path_to_code(path: str) -> int:
    code = 0
    for ch in path:
        if ch not in _DIGITS:
            raise ValueError(f"invalid path digit {ch!r} in {path!r}")
        code = (code << 2) | (ord(ch) - 48)
    return code


def path_cell(path: str):
    """Return ``(a, b)``, the column/row indices of ``path`` at its own level."""
    return kernels.demorton(path_to_code(path))


def cell_bounds(path: str, W: float, origin: Point = Point(0.0, 0.0)):
    """``(x_lo, y_lo, side)`` of the cell named by ``path`` in dataset units."""
    a, b = path_cell(path)
    side = W / (1 << len(path))
    return origin.x + a * side, origin.y + b * side, side


def cell_center(path: str, W: float, origin: Point = Point(0.0, 0.0)) -> Point:
    x0, y0, side = cell_bounds(path, W, origin)
    return Point(x0 + 0.5 * side, y0 + 0.5 * side)


def is_prefix(a: str, b: str) -> bool:
    return len(a) <= len(b) and b.startswith(a)


def cell_code(p_norm: Point, level_width: float, cell_origin: Point) -> int:
    """Child digit of ``p_norm`` inside the cell at ``cell_origin`` of side ``2*level_width``."""
    x0, y0 = cell_origin.x, cell_origin.y
    side = 2 * level_width
    if not (x0 <= p_norm.x <= x0 + side and y0 <= p_norm.y <= y0 + side):
        raise OutOfCell(f"{p_norm} outside cell at {cell_origin} (side {side})")
    right = 1 if p_norm.x >= x0 + level_width else 0
    upper = 1 if p_norm.y >= y0 + level_width else 0
    return 2 * upper + right


def normalized_t(x, origin, W):
    """Map dataset coordinates into the unit interval of the bounding square."""
    return (x - origin) / W


def point_path(p: Point, level: int, W: float, origin: Point = Point(0.0, 0.0)) -> str:
    """Path of the level-``level`` cell containing the (dataset-unit) point ``p``."""
    tx = normalized_t(p.x, origin.x, W)
    ty = normalized_t(p.y, origin.y, W)
    if not (0.0 <= tx <= 1.0 and 0.0 <= ty <= 1.0):
        raise OutOfBounds(f"{p} outside the bounding square")
    n = 1 << level
    a = min(int(np.floor(tx * n)), n - 1)
    b = min(int(np.floor(ty * n)), n - 1)
    code = int(kernels.morton_codes(np.array([a]), np.array([b]))[0])
    return code_to_path(level, code)


# --------------------------------------------------------------------------
# entries

@dataclass
class PlainEntry:
    keyword: str
    path: str
    delta: tuple
    delta_k: tuple
    rep: GeoObject | None
    overflow: bool = False

    @property
    def key(self):
        return (self.keyword, self.path)


@dataclass
class KQTree:
    keyword: str
    entries: list
    height: int
    empty_leaves: list = field(default_factory=list)

    def leaf_paths(self):
        return [e.path for e in self.entries] + list(self.empty_leaves)


class GroupArrays:
    """Coordinate/rank arrays for one keyword group, reused across kNN calls."""

    def __init__(self, group):
        self.objects = list(group)
        n = len(self.objects)
        self.xs = np.fromiter((o.p.x for o in self.objects), np.float64, n)
        self.ys = np.fromiter((o.p.y for o in self.objects), np.float64, n)
        order = sorted(range(n), key=lambda i: self.objects[i].id)
        self.ranks = np.empty(n, np.int64)
        self.ranks[order] = np.arange(n, dtype=np.int64)
        self.index = {o.id: i for i, o in enumerate(self.objects)}

    def __len__(self):
        return len(self.objects)

    def knn(self, centers, exclude, k):
        """k nearest members of each center point, by (distance, id)."""
        cx = np.array([c.x for c in centers], np.float64)
        cy = np.array([c.y for c in centers], np.float64)
        ex = np.array(exclude, np.int64)
        return kernels.knn(self.xs, self.ys, self.ranks, cx, cy, ex, int(k))


def select_representative(cell_objects, cell_center: Point) -> GeoObject:
    """Object closest to the cell center; ties go to the smallest id."""
    return min(cell_objects,
               key=lambda o: (distance(o.p.x, o.p.y, cell_center.x, cell_center.y), o.id))


def knn_in_group(group, center: GeoObject, k: int) -> list:
    """The ``k`` members of ``group`` nearest ``center`` (excluding itself)."""
    arrays = group if isinstance(group, GroupArrays) else GroupArrays(group)
    ex = arrays.index.get(center.id, -1)
    kk = min(k, len(arrays) - (1 if ex >= 0 else 0))
    if kk <= 0:
        return []
    idx = arrays.knn([center.p], [ex], kk)[0]
    return [arrays.objects[i] for i in idx if i >= 0]


def neighbour_set(arrays: GroupArrays, rep: GeoObject | None, center: Point, k_max: int) -> tuple:
    """Delta^k of a cell: k_max NNs of its representative (of the center if empty)."""
    if rep is not None:
        return tuple(knn_in_group(arrays, rep, k_max))
    kk = min(k_max, len(arrays))
    if kk == 0:
        return ()
    idx = arrays.knn([center], [-1], kk)[0]
    return tuple(arrays.objects[i] for i in idx if i >= 0)


def make_entry(keyword, path, delta, arrays: GroupArrays, k_max, W, origin=Point(0.0, 0.0)):
    """Build a PlainEntry for ``path`` holding ``delta`` with a fresh Delta^k."""
    delta = tuple(sorted(delta, key=lambda o: o.id))
    center = cell_center(path, W, origin)
    rep = select_representative(delta, center) if delta else None
    return PlainEntry(keyword, path, delta, neighbour_set(arrays, rep, center, k_max), rep,
                      overflow=len(delta) > k_max)


def build_kq_tree(group, keyword: str, k_max: int, W: float,
                  origin: Point = Point(0.0, 0.0)) -> KQTree:
    """Partition ``group`` into a capacity-``k_max`` quadtree and flatten it.

    The root always splits, so every leaf path has length >= 1.  Cells at
    ``DEPTH_CAP`` never split and may hold more than ``k_max`` objects.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    arrays = GroupArrays(group)
    n = len(arrays)
    if n == 0:
        raise ValueError("empty group")
    for o in arrays.objects:
        if keyword not in o.psi:
            raise ValueError(f"object {o.id!r} lacks keyword {keyword!r}")

    tx = normalized_t(arrays.xs, origin.x, W)
    ty = normalized_t(arrays.ys, origin.y, W)
    if tx.min() < 0 or ty.min() < 0 or tx.max() > 1 or ty.max() > 1:
        raise OutOfBounds("group extends beyond the bounding square")
    codes = kernels.morton_codes(kernels.grid_indices(tx, DEPTH_CAP),
                                 kernels.grid_indices(ty, DEPTH_CAP))
    order = np.argsort(codes, kind="stable")
    lv, cd, lo, hi = kernels.leaves(codes[order], int(k_max), DEPTH_CAP)

    filled = np.nonzero(hi > lo)[0]
    empty_leaves = [code_to_path(int(lv[i]), int(cd[i])) for i in np.nonzero(hi == lo)[0]]
    if filled.size == 0:
        return KQTree(keyword, [], 0, empty_leaves)

    # representative per filled leaf, vectorized over all members
    counts = (hi - lo)[filled]
    leaf_of = np.repeat(np.arange(filled.size), counts)
    members = np.concatenate([order[lo[i]:hi[i]] for i in filled])
    centers_x = np.empty(filled.size)
    centers_y = np.empty(filled.size)
    paths = []
    for j, i in enumerate(filled):
        path = code_to_path(int(lv[i]), int(cd[i]))
        paths.append(path)
        c = cell_center(path, W, origin)
        centers_x[j] = c.x
        centers_y[j] = c.y
    dist = distance(arrays.xs[members], arrays.ys[members], centers_x[leaf_of], centers_y[leaf_of])
    pick = np.lexsort((arrays.ranks[members], dist, leaf_of))
    first = np.ones(pick.size, dtype=bool)
    first[1:] = leaf_of[pick][1:] != leaf_of[pick][:-1]
    rep_idx = members[pick[first]]

    kk = min(k_max, n - 1)
    if kk > 0:
        nn = kernels.knn(arrays.xs, arrays.ys, arrays.ranks,
                         arrays.xs[rep_idx], arrays.ys[rep_idx], rep_idx.astype(np.int64), kk)
    else:
        nn = np.empty((filled.size, 0), np.int64)

    objs = arrays.objects
    entries = []
    for j, i in enumerate(filled):
        delta = tuple(sorted((objs[m] for m in order[lo[i]:hi[i]]), key=lambda o: o.id))
        entries.append(PlainEntry(
            keyword, paths[j], delta,
            tuple(objs[m] for m in nn[j] if m >= 0),
            objs[rep_idx[j]],
            overflow=bool(hi[i] - lo[i] > k_max),
        ))
    height = max(len(e.path) for e in entries)
    return KQTree(keyword, entries, height, empty_leaves)
