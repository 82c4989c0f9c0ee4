"""Geo-textual objects, datasets, and Euclidean geometry."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import DuplicateId, EmptyDataset, ParseError


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinate: ({self.x}, {self.y})")


@dataclass(frozen=True)
class GeoObject:
    id: str
    p: Point
    psi: frozenset

    def __post_init__(self):
        if not self.psi:
            raise ValueError(f"object {self.id!r} has no keywords")
        for w in self.psi:
            if not w or any(c.isspace() for c in w):
                raise ValueError(f"invalid keyword {w!r} on object {self.id!r}")

    @classmethod
    def make(cls, id, x, y, keywords):
        return cls(str(id), Point(float(x), float(y)), frozenset(keywords))


def distance(ax, ay, bx, by):
    """Euclidean distance; works elementwise on numpy arrays.

    Every component that compares distances (engine, oracle, tree build) goes
    through this one expression so ties resolve identically everywhere.
    """
    dx = ax - bx
    dy = ay - by
    if isinstance(dx, np.ndarray) or isinstance(dy, np.ndarray):
        return np.sqrt(dx * dx + dy * dy)
    return math.sqrt(dx * dx + dy * dy)


def euclidean(a: Point, b: Point) -> float:
    return distance(a.x, a.y, b.x, b.y)


@dataclass
class Dataset:
    objects: list
    bbox_min: Point
    width: float
    _by_id: dict = field(default=None, repr=False, compare=False)

    @classmethod
    def from_objects(cls, objects: Iterable[GeoObject]) -> "Dataset":
        objects = list(objects)
        if not objects:
            raise EmptyDataset("dataset has no objects")
        seen = set()
        for o in objects:
            if o.id in seen:
                raise DuplicateId(o.id)
            seen.add(o.id)
        xs = [o.p.x for o in objects]
        ys = [o.p.y for o in objects]
        lo = min(min(xs), min(ys))
        hi = max(max(xs), max(ys))
        width = hi - lo
        if width == 0:
            width = 1.0
        return cls(objects, Point(min(xs), min(ys)), width)

    def __len__(self):
        return len(self.objects)

    @property
    def by_id(self) -> dict:
        if self._by_id is None or len(self._by_id) != len(self.objects):
            self._by_id = {o.id: o for o in self.objects}
        return self._by_id

    @property
    def extent(self) -> float:
        """Raw pooled coordinate span; ``width`` differs only when this is 0."""
        xs = [o.p.x for o in self.objects]
        ys = [o.p.y for o in self.objects]
        return max(max(xs), max(ys)) - min(min(xs), min(ys))

    def normalize(self, x, y):
        return x - self.bbox_min.x, y - self.bbox_min.y


def group_by_keyword(d: Dataset | Iterable[GeoObject]) -> dict:
    """Map each keyword to the objects carrying it, in dataset order."""
    objects = d.objects if isinstance(d, Dataset) else list(d)
    if not objects:
        raise EmptyDataset("dataset has no objects")
    groups: dict = {}
    for o in objects:
        for w in sorted(o.psi):
            groups.setdefault(w, []).append(o)
    return groups


def load_dataset(path, format="tsv") -> Dataset:
    if format != "tsv":
        raise ValueError(f"unsupported dataset format {format!r}")
    objects = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ParseError(f"expected 4 tab-separated fields, got {len(parts)}", lineno)
            oid, xs, ys, kws = parts
            if not oid:
                raise ParseError("empty id", lineno)
            try:
                x = float(xs)
                y = float(ys)
            except ValueError:
                raise ParseError(f"bad coordinate in {line!r}", lineno) from None
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ParseError("non-finite coordinate", lineno)
            words = kws.split()
            if not words:
                raise ParseError("object has no keywords", lineno)
            if oid in seen:
                raise DuplicateId(f"line {lineno}: duplicate id {oid!r}")
            seen.add(oid)
            objects.append(GeoObject(oid, Point(x, y), frozenset(words)))
    if not objects:
        raise EmptyDataset(f"{path}: no objects")
    return Dataset.from_objects(objects)


def save_dataset(path, d: Dataset | Iterable[GeoObject]) -> None:
    objects = d.objects if isinstance(d, Dataset) else d
    with open(path, "w", encoding="utf-8") as fh:
        for o in objects:
            fh.write(f"{o.id}\t{o.p.x!r}\t{o.p.y!r}\t{' '.join(sorted(o.psi))}\n")


RANGE = "range"
NEAREST = "nn"
KNN = "knn"


@dataclass(frozen=True)
class QuerySpec:
    kind: str
    p: Point
    psi: frozenset
    r: float = 0.0
    k: int = 1

    def __post_init__(self):
        if self.kind not in (RANGE, NEAREST, KNN):
            raise ValueError(f"unknown query kind {self.kind!r}")
        if self.kind == RANGE and not self.r >= 0:
            raise ValueError("range radius must be >= 0")
        if self.kind == KNN and self.k < 1:
            raise ValueError("k must be >= 1")
        if self.kind == NEAREST and self.k != 1:
            object.__setattr__(self, "k", 1)

    @classmethod
    def range(cls, x, y, keywords, r):
        return cls(RANGE, Point(float(x), float(y)), frozenset(keywords), r=float(r))

    @classmethod
    def nearest(cls, x, y, keywords):
        return cls(NEAREST, Point(float(x), float(y)), frozenset(keywords), k=1)

    @classmethod
    def knn(cls, x, y, keywords, k):
        return cls(KNN, Point(float(x), float(y)), frozenset(keywords), k=int(k))

    def matches(self, o: GeoObject) -> bool:
        return self.psi <= o.psi
