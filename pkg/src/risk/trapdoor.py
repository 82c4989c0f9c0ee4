"""Client-side trapdoors for range, nearest-neighbour and kNN queries.

A trapdoor is the set of PRF tokens ``H(w || ID)`` over the query keywords and
the cover identifiers of one or more discs.  Within one logical query a
:class:`TrapdoorSession` never re-sends an identifier it already issued.
"""
from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field

from . import kernels
from .codec import encode_key
from .cover import cover_rect, path_id_to_str, path_ids
from .crypto import SecretKeys, Tokenizer
from .errors import EmptyKeywords, EmptyPhase1
from .geo import KNN, NEAREST, RANGE, QuerySpec
from .protocol import decode_trapdoor, encode_trapdoor
from .records import SystemParams

QUERY_ID_LEN = 16


class Phase(enum.IntEnum):
    SINGLE = 0
    KPHASE1 = 1
    KPHASE2 = 2
    SUPPLEMENTARY = 3


@dataclass
class Trapdoor:
    tokens: list
    phase: Phase = Phase.SINGLE
    theta: int = 0
    query_id: bytes = field(default_factory=lambda: os.urandom(QUERY_ID_LEN))

    def __len__(self):
        return len(self.tokens)

    def encode(self) -> bytes:
        return encode_trapdoor(self.query_id, self.phase, self.theta, self.tokens)

    @classmethod
    def decode(cls, payload: bytes, token_len: int) -> "Trapdoor":
        tokens, phase, theta, qid = decode_trapdoor(payload, token_len)
        return cls(tokens, Phase(phase), theta, qid)


def normalized_point(q: QuerySpec, sp: SystemParams):
    return q.p.x - sp.x0, q.p.y - sp.y0


class TrapdoorSession:
    """Token generation state for one logical query."""

    def __init__(self, keywords, sp: SystemParams, keys: SecretKeys, query_id=None,
                 tokenizer=None):
        keywords = sorted(keywords)
        if not keywords:
            raise EmptyKeywords("query has no keywords")
        self.keywords = keywords
        self.sp = sp
        self.prf = tokenizer or Tokenizer(keys)
        self.query_id = query_id or os.urandom(QUERY_ID_LEN)
        self.sent = set()
        self.radii = []
        self.covered = 0.0

    def issue(self, discs, phase=Phase.SINGLE, theta=0) -> Trapdoor:
        """Trapdoor for the union of cover sets of ``discs`` = [(px, py, r), ...]
        (normalized coordinates), skipping identifiers already sent."""
        ordered = []
        for px, py, r in discs:
            self.radii.append(r)
            rect = cover_rect(px, py, r, self.sp.d, self.sp.W)
            if rect is None:
                continue
            self.covered = max(self.covered, rect_clearance(px, py, rect, self.sp.d, self.sp.W))
            levels, codes = kernels.cover_cells(*rect, self.sp.d)
            for pid in path_ids(levels, codes).tolist():
                if pid not in self.sent:
                    self.sent.add(pid)
                    ordered.append(pid)
        tokens = []
        for pid in ordered:
            path = path_id_to_str(pid)
            for w in self.keywords:
                tokens.append(self.prf(encode_key(w, path)))
        return Trapdoor(tokens, phase, theta, self.query_id)

    @property
    def max_radius(self) -> float:
        return max(self.radii) if self.radii else -math.inf


def rect_clearance(px, py, rect, d, W) -> float:
    """Radius around ``(px, py)`` inside which every point of the domain lies in
    the finest-cell rectangle ``rect``.  Sides on the domain edge never bind,
    so a rectangle spanning the whole domain gives ``inf``."""
    i_lo, i_hi, j_lo, j_hi = rect
    n = 1 << d
    w = W / n
    gaps = []
    if i_lo > 0:
        gaps.append(px - i_lo * w)
    if i_hi < n - 1:
        gaps.append((i_hi + 1) * w - px)
    if j_lo > 0:
        gaps.append(py - j_lo * w)
    if j_hi < n - 1:
        gaps.append((j_hi + 1) * w - py)
    return max(0.0, min(gaps)) if gaps else math.inf


def r_trapdoor(q: QuerySpec, sp: SystemParams, keys: SecretKeys) -> Trapdoor:
    if q.kind != RANGE:
        raise ValueError("r_trapdoor needs a range query")
    px, py = normalized_point(q, sp)
    return TrapdoorSession(q.psi, sp, keys).issue([(px, py, q.r)], Phase.SINGLE)


def n_trapdoor(q: QuerySpec, sp: SystemParams, keys: SecretKeys, session=None) -> Trapdoor:
    """Phase-one trapdoor (radius 0); identical for NN and kNN queries."""
    if q.kind not in (NEAREST, KNN):
        raise ValueError("n_trapdoor needs a nearest-neighbour or kNN query")
    session = session or TrapdoorSession(q.psi, sp, keys)
    px, py = normalized_point(q, sp)
    return session.issue([(px, py, 0.0)], Phase.KPHASE1)


def k_phase2_radius(path_len: int, theta: int, sp: SystemParams) -> float:
    """Disc radius enclosing a level-``path_len`` cell and its neighbours,
    widened by ``theta`` finest-cell widths."""
    if path_len < 1 or theta < 0:
        raise ValueError("need path_len >= 1 and theta >= 0")
    return (math.sqrt(2) * sp.W * 2.0 ** (-path_len - 1)
            + (theta + 0.1) * sp.W * 2.0 ** (-sp.d))


def nn_supplementary_radius(theta: int, sp: SystemParams) -> float:
    """Radius schedule when phase one located nothing: 0, w, 2w, ..."""
    return theta * sp.finest_width


def k_trapdoor_phase2(q: QuerySpec, phase1_candidates, theta: int, sp: SystemParams,
                      keys: SecretKeys, session=None) -> Trapdoor:
    """Second-phase (theta = 0) or supplementary (theta >= 1) kNN trapdoor.

    ``phase1_candidates`` are decoded phase-one values; each contributes one
    disc whose radius depends on its own path length.
    """
    if not phase1_candidates:
        raise EmptyPhase1("phase one returned no candidate")
    session = session or TrapdoorSession(q.psi, sp, keys)
    px, py = normalized_point(q, sp)
    lengths = sorted({len(c.path) for c in phase1_candidates})
    discs = [(px, py, k_phase2_radius(n, theta, sp)) for n in lengths]
    phase = Phase.KPHASE2 if theta == 0 else Phase.SUPPLEMENTARY
    return session.issue(discs, phase, theta)
