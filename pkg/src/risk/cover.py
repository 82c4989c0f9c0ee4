"""Potentially-covered cell identifiers for a query disc.

The client knows only the global height ``d`` and width ``W``.  For a disc
``(p, r)`` it enumerates every finest-level cell meeting the circumscribed
square (clamped to the bounding square) and every ancestor of those cells.
Ancestors that are not leaves in some keyword tree simply miss at the cloud.
Points are expected in normalized coordinates (bounding-square origin at 0).
"""
from __future__ import annotations

import math

import numpy as np

from . import kernels
from .errors import OutOfBounds
from .geo import Point
from .kqtree import code_to_path


def cover_rect(px: float, py: float, r: float, d: int, W: float):
    """Inclusive finest-level index ranges ``(i_lo, i_hi, j_lo, j_hi)``, or None."""
    if d < 1 or W <= 0:
        raise ValueError("need d >= 1 and W > 0")
    if r < 0:
        raise ValueError("radius must be non-negative")
    n = 1 << d
    tx_lo = (px - r) / W
    tx_hi = (px + r) / W
    ty_lo = (py - r) / W
    ty_hi = (py + r) / W
    if tx_hi < 0 or ty_hi < 0 or tx_lo > 1 or ty_lo > 1:
        return None

    def clamp(t):
        return min(max(math.floor(t * n), 0), n - 1)

    return clamp(tx_lo), clamp(tx_hi), clamp(ty_lo), clamp(ty_hi)


def cover_codes(px: float, py: float, r: float, d: int, W: float):
    """Cover set as parallel ``(levels, codes)`` arrays in first-seen order."""
    rect = cover_rect(px, py, r, d, W)
    if rect is None:
        empty = np.empty(0, np.int64)
        return empty, empty
    return kernels.cover_cells(rect[0], rect[1], rect[2], rect[3], d)


def path_ids(levels, codes):
    """Unique integer id per path: a sentinel bit above the 2*level code bits."""
    return (np.int64(1) << (2 * levels)) | codes


def path_id_to_str(pid: int) -> str:
    level = (int(pid).bit_length() - 1) // 2
    return code_to_path(level, int(pid) ^ (1 << (2 * level)))


def cover_identifiers(p: Point, r: float, d: int, W: float) -> list:
    """Ordered, de-duplicated cover set as path strings."""
    levels, codes = cover_codes(p.x, p.y, r, d, W)
    return [code_to_path(int(lv), int(c)) for lv, c in zip(levels, codes)]


def path_of_point(p: Point, level: int, d: int, W: float) -> str:
    if not 1 <= level <= d:
        raise ValueError(f"level {level} outside 1..{d}")
    if not (0 <= p.x <= W and 0 <= p.y <= W):
        raise OutOfBounds(f"{p} outside [0, {W}]^2")
    n = 1 << level
    a = min(math.floor(p.x / W * n), n - 1)
    b = min(math.floor(p.y / W * n), n - 1)
    code = int(kernels.morton_codes(np.array([a]), np.array([b]))[0])
    return code_to_path(level, code)
