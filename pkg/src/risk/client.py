"""Client-side query engine: decryption, refinement, and the kNN expansion loop.

Range queries take one round trip and refine over each entry's resident set.
Nearest-neighbour and kNN queries start from the cells containing the query
point, then widen the covered disc until the k-th best candidate provably
lies inside the region whose every cell has been retrieved.
"""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

from .codec import ValueDecoder
from .crypto import SecretKeys, Tokenizer, _aead, decrypt_value
from .errors import NoMatchingObject
from .geo import KNN, NEAREST, RANGE, QuerySpec, distance
from .kqtree import path_cell
from .records import SystemParams
from .results import QueryStats, ResultSet, ranked
from .trapdoor import (Phase, TrapdoorSession, k_phase2_radius, normalized_point,
                       rect_clearance)

# relative slack applied to every "strictly inside" comparison
_EPS = 1e-9


@dataclass
class CandidateSet:
    entries: list
    phase: Phase = Phase.SINGLE

    def __len__(self):
        return len(self.entries)


def decrypt_candidates(records, keys: SecretKeys, phase=Phase.SINGLE, aead=None,
                       decoder=None) -> CandidateSet:
    """Decrypt and decode returned ``(token, ciphertext)`` pairs.

    Raises AuthenticationFailure on the first tampered record.
    """
    aead = aead or _aead(keys)
    decoder = decoder or ValueDecoder()
    return CandidateSet([decoder(decrypt_value(keys, ct, aead)) for _, ct in records], phase)


def _match_pool(q: QuerySpec, values, use_neighbours: bool):
    seen = set()
    out = []
    for v in values:
        groups = (v.delta, v.delta_k) if use_neighbours else (v.delta,)
        for g in groups:
            for o in g:
                if o not in seen:
                    seen.add(o)
                    if q.psi <= o.psi:
                        out.append(o)
    return out


def r_query(q: QuerySpec, c: CandidateSet) -> ResultSet:
    """Exact circle and keyword filter over resident sets only."""
    px, py, r = q.p.x, q.p.y, q.r
    hits = [o for o in _match_pool(q, c.entries, False)
            if distance(o.p.x, o.p.y, px, py) <= r]
    return ResultSet(ranked(q.p, hits), exact=True)


def k_query(q: QuerySpec, *candidate_sets) -> ResultSet:
    """The k best matching objects over resident and neighbour sets.

    Exactness is decided by the caller, which knows the covered region.
    """
    values = [v for c in candidate_sets for v in c.entries]
    pool = _match_pool(q, values, True)
    best = heapq.nsmallest(q.k, pool, key=lambda o: (distance(o.p.x, o.p.y, q.p.x, q.p.y), o.id))
    return ResultSet(best, exact=False)


def n_query(q: QuerySpec, c: CandidateSet) -> ResultSet:
    return k_query(QuerySpec.knn(q.p.x, q.p.y, q.psi, 1), c)


def leaf_clearance(px: float, py: float, path: str, W: float) -> float:
    """Radius around the point within which every domain point lies in ``path``'s cell."""
    a, b = path_cell(path)
    return rect_clearance(px, py, (a, a, b, b), len(path), W)


class Client:
    """Query orchestration over one transport."""

    def __init__(self, transport, keys: SecretKeys, sp: SystemParams):
        self.transport = transport
        self.keys = keys
        self.sp = sp
        self.prf = Tokenizer(keys)
        self.aead = _aead(keys)

    def session(self, keywords) -> TrapdoorSession:
        return TrapdoorSession(keywords, self.sp, self.keys, tokenizer=self.prf)

    def fetch(self, session, discs, phase, theta, stats: QueryStats, decoder) -> CandidateSet:
        """Issue one trapdoor round and decrypt what comes back."""
        t0 = time.perf_counter()
        td = session.issue(discs, phase, theta)
        t1 = time.perf_counter()
        sent, recv = self.transport.bytes_sent, self.transport.bytes_received
        records = self.transport.query(td)
        t2 = time.perf_counter()
        c = decrypt_candidates(records, self.keys, phase, self.aead, decoder)
        t3 = time.perf_counter()
        stats.rounds += 1
        stats.tokens += len(td)
        stats.entries += len(c)
        stats.bytes_sent += self.transport.bytes_sent - sent
        stats.bytes_received += self.transport.bytes_received - recv
        stats.trapdoor_s += t1 - t0
        stats.cloud_s += t2 - t1
        stats.client_s += t3 - t2
        return c

    def run_range(self, q: QuerySpec) -> ResultSet:
        if q.kind != RANGE:
            raise ValueError("run_range needs a range query")
        stats = QueryStats()
        px, py = normalized_point(q, self.sp)
        c = self.fetch(self.session(q.psi), [(px, py, q.r)], Phase.SINGLE, 0, stats,
                       ValueDecoder())
        t0 = time.perf_counter()
        res = r_query(q, c)
        stats.client_s += time.perf_counter() - t0
        res.stats = stats
        return res

    def run_knn(self, q: QuerySpec) -> ResultSet:
        """Nearest-neighbour / kNN query with proven exactness.

        Every candidate is drawn from decrypted entries.  The loop stops when
        the k-th best distance is strictly inside the covered radius: the
        larger of what the issued cover rectangles guarantee and what the
        phase-one leaf cells guarantee.  Inside that radius every live
        matching object sits in some retrieved resident set, so neighbour-set
        objects not confirmed by a resident set there are dropped as stale.
        """
        if q.kind not in (NEAREST, KNN):
            raise ValueError("run_knn needs a nearest-neighbour or kNN query")
        sp = self.sp
        k = q.k
        stats = QueryStats()
        decoder = ValueDecoder()
        session = self.session(q.psi)
        px, py = normalized_point(q, sp)
        qx, qy = q.p.x, q.p.y

        pool = {}          # matching object -> distance
        witnessed = set()  # objects confirmed by a resident set

        def absorb(c: CandidateSet):
            t0 = time.perf_counter()
            for v in c.entries:
                for o in v.delta:
                    witnessed.add(o)
                    if o not in pool and q.psi <= o.psi:
                        pool[o] = distance(o.p.x, o.p.y, qx, qy)
                for o in v.delta_k:
                    if o not in pool and q.psi <= o.psi:
                        pool[o] = distance(o.p.x, o.p.y, qx, qy)
            stats.client_s += time.perf_counter() - t0

        c1 = self.fetch(session, [(px, py, 0.0)], Phase.KPHASE1, 0, stats, decoder)
        absorb(c1)
        leaf_guard = max((leaf_clearance(px, py, v.path, sp.W) for v in c1.entries),
                         default=0.0)
        lengths = sorted({len(v.path) for v in c1.entries})
        w = sp.finest_width
        theta = -1

        while True:
            t0 = time.perf_counter()
            covered = max(session.covered, leaf_guard)
            limit = covered * (1 - _EPS)
            best = heapq.nsmallest(
                k, ((dist, o.id, o) for o, dist in pool.items()
                    if o in witnessed or dist >= limit))
            stats.client_s += time.perf_counter() - t0
            if covered == math.inf or (len(best) == k and best[-1][0] < limit):
                break
            if lengths:
                base = k_phase2_radius(lengths[0], 0, sp) - 0.1 * w
                radius_of = lambda th: [(px, py, k_phase2_radius(n, th, sp)) for n in lengths]
            else:
                base = -0.1 * w
                radius_of = lambda th: [(px, py, th * w)]
            if theta < 0 and lengths:
                theta = 0
            elif len(best) == k:
                need = (best[-1][0] * (1 + 1e-6) - base) / w - 0.1
                theta = max(theta + 1, math.ceil(need))
            else:
                theta = max(theta + 1, 2 * theta)
            phase = Phase.KPHASE2 if theta == 0 else Phase.SUPPLEMENTARY
            absorb(self.fetch(session, radius_of(theta), phase, theta, stats, decoder))

        objects = [o for _, _, o in best]
        if q.kind == NEAREST and not objects:
            raise NoMatchingObject(f"no object carries all of {sorted(q.psi)}")
        return ResultSet(objects, exact=True, stats=stats)


def run_range(q: QuerySpec, transport, keys: SecretKeys, sp: SystemParams) -> ResultSet:
    return Client(transport, keys, sp).run_range(q)


def run_knn(q: QuerySpec, transport, keys: SecretKeys, sp: SystemParams) -> ResultSet:
    return Client(transport, keys, sp).run_knn(q)
