"""Query results and per-query measurements."""
from __future__ import annotations

from dataclasses import dataclass, field

from .geo import GeoObject, Point, distance


@dataclass
class QueryStats:
    rounds: int = 0
    tokens: int = 0
    entries: int = 0
    bytes_sent: int = 0
    bytes_received: int = 0
    trapdoor_s: float = 0.0
    cloud_s: float = 0.0
    client_s: float = 0.0

    @property
    def total_s(self) -> float:
        return self.trapdoor_s + self.cloud_s + self.client_s


@dataclass
class ResultSet:
    """Objects in answer order; ``exact`` is set once coverage is proven."""
    objects: list
    exact: bool = True
    stats: QueryStats | None = field(default=None, compare=False)

    @property
    def ids(self) -> list:
        return [o.id for o in self.objects]

    def __len__(self):
        return len(self.objects)


def rank_key(p: Point, o: GeoObject):
    """Answer order: ascending distance, ties by id."""
    return (distance(o.p.x, o.p.y, p.x, p.y), o.id)


def ranked(p: Point, objects) -> list:
    return sorted(objects, key=lambda o: rank_key(p, o))
