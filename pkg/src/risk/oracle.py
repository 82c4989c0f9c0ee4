"""Plaintext brute-force answers, the ground truth for every engine test.

Deliberately index-free: each query is one linear scan of the dataset.
"""
from __future__ import annotations

from .geo import KNN, NEAREST, RANGE, Dataset, QuerySpec, distance
from .results import ResultSet


def _objects(d):
    return d.objects if isinstance(d, Dataset) else list(d)


def oracle_range(d, q: QuerySpec) -> ResultSet:
    if q.kind != RANGE:
        raise ValueError("oracle_range needs a range query")
    hits = []
    for o in _objects(d):
        if q.psi <= o.psi:
            dist = distance(o.p.x, o.p.y, q.p.x, q.p.y)
            if dist <= q.r:
                hits.append((dist, o.id, o))
    hits.sort(key=lambda t: (t[0], t[1]))
    return ResultSet([o for _, _, o in hits], exact=True)


def oracle_knn(d, q: QuerySpec) -> ResultSet:
    if q.kind not in (NEAREST, KNN):
        raise ValueError("oracle_knn needs a nearest-neighbour or kNN query")
    scored = [(distance(o.p.x, o.p.y, q.p.x, q.p.y), o.id, o)
              for o in _objects(d) if q.psi <= o.psi]
    scored.sort(key=lambda t: (t[0], t[1]))
    return ResultSet([o for _, _, o in scored[:q.k]], exact=True)


def oracle(d, q: QuerySpec) -> ResultSet:
    return oracle_range(d, q) if q.kind == RANGE else oracle_knn(d, q)
