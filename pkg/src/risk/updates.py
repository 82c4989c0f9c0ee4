"""Single-object insert and delete driven by the data owner.

The owner keeps the plaintext dataset.  For each keyword of the object it
locates the home cell with a phase-one query, widens the disc round by round
to fetch neighbouring entries, recomputes their neighbour sets against the
updated keyword group, and re-encrypts the entries that changed.  The tree
never splits; a home cell may grow past ``k_max`` up to the provisioned value
length.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .client import Client
from .codec import ObjectEncoder, ValueDecoder, encode_key, serialize_value
from .crypto import SecretKeys, encrypt_value
from .errors import CapacityExceeded, CorruptIndex, DuplicateId, NotFound, OutOfBounds
from .geo import Dataset, GeoObject, Point
from .kqtree import GroupArrays, make_entry, point_path
from .records import SystemParams
from .results import QueryStats
from .trapdoor import Phase, k_phase2_radius


@dataclass
class UpdateReceipt:
    kind: str
    object_id: str
    touched: list = field(default_factory=list)   # (keyword, path) re-encrypted
    created: list = field(default_factory=list)   # (keyword, path) newly added
    tokens: list = field(default_factory=list)
    created_tokens: list = field(default_factory=list)
    stats: QueryStats = field(default_factory=QueryStats)


def _next_theta(theta: int) -> int:
    # unit steps near the home cell, geometric growth further out
    return theta + 1 if theta < 4 else math.ceil(theta * 1.5)


class Owner:
    """Data owner holding keys, public parameters, and the plaintext objects."""

    def __init__(self, dataset: Dataset, keys: SecretKeys, sp: SystemParams, transport):
        self.objects = {o.id: o for o in dataset.objects}
        self.groups = {}
        for o in dataset.objects:
            for w in o.psi:
                self.groups.setdefault(w, {})[o.id] = o
        self.keys = keys
        self.sp = sp
        self.transport = transport
        self.client = Client(transport, keys, sp)
        self.origin = Point(sp.x0, sp.y0)
        self.encoder = ObjectEncoder()

    def dataset(self) -> Dataset:
        return Dataset(list(self.objects.values()), self.origin, self.sp.W)

    # ------------------------------------------------------------------

    def _explore(self, keyword, p: Point, arrays: GroupArrays, home_delta, stats):
        """Fetch the home entry of ``p`` and widen until a round adds no affected entry.

        ``home_delta(value)`` maps the home entry's resident set to its updated
        form.  Returns ``(home, changed)`` where ``changed`` maps path to the
        recomputed PlainEntry of every entry whose value differs.
        """
        sp = self.sp
        c = self.client
        session = c.session([keyword])
        decoder = ValueDecoder()
        px, py = p.x - sp.x0, p.y - sp.y0
        c1 = c.fetch(session, [(px, py, 0.0)], Phase.KPHASE1, 0, stats, decoder)
        home = c1.entries[0] if c1.entries else None
        changed = {}

        def recompute(v, delta):
            e = make_entry(keyword, v.path, delta, arrays, sp.k_max, sp.W, self.origin)
            if e.delta != tuple(v.delta) or e.delta_k != tuple(v.delta_k):
                changed[v.path] = e
                return True
            return False

        if home is not None:
            recompute(home, home_delta(home.delta))
        lengths = [len(home.path)] if home is not None else []
        theta = 0 if lengths else 1
        w = sp.finest_width
        while session.covered != math.inf:
            discs = ([(px, py, k_phase2_radius(lengths[0], theta, sp))] if lengths
                     else [(px, py, theta * w)])
            phase = Phase.KPHASE2 if theta == 0 else Phase.SUPPLEMENTARY
            batch = c.fetch(session, discs, phase, theta, stats, decoder)
            hit = False
            for v in batch.entries:
                if home is not None and v.path == home.path:
                    continue
                hit |= recompute(v, v.delta)
            if batch.entries and not hit:
                break
            theta = _next_theta(theta)
        return home, changed

    def _seal(self, entries, receipt: UpdateReceipt):
        prf = self.client.prf
        records = []
        for e in entries:
            value = serialize_value(e.key, e.delta, e.delta_k, self.encoder)
            if len(value) > self.sp.len:
                raise CapacityExceeded(
                    f"entry ({e.keyword}, {e.path}) needs {len(value)} bytes, "
                    f"provisioned {self.sp.len}; rebuild the index")
            records.append((prf(encode_key(e.keyword, e.path)), value))
        sealed = [(t, encrypt_value(self.keys, v, self.sp.len, self.client.aead))
                  for t, v in records]
        receipt.tokens = [t for t, _ in sealed]
        return sealed

    def insert_object(self, o: GeoObject) -> UpdateReceipt:
        if o.id in self.objects:
            raise DuplicateId(o.id)
        sp = self.sp
        tx, ty = (o.p.x - sp.x0) / sp.W, (o.p.y - sp.y0) / sp.W
        if not (0.0 <= tx <= 1.0 and 0.0 <= ty <= 1.0):
            raise OutOfBounds(f"{o.id!r} at {o.p} lies outside the indexed square")
        receipt = UpdateReceipt("insert", o.id)
        entries = []
        for w in sorted(o.psi):
            arrays = GroupArrays(list(self.groups.get(w, {}).values()) + [o])
            home, changed = self._explore(w, o.p, arrays, lambda delta: tuple(delta) + (o,),
                                          receipt.stats)
            if home is None:
                path = point_path(o.p, sp.d, sp.W, self.origin)
                changed[path] = make_entry(w, path, (o,), arrays, sp.k_max, sp.W, self.origin)
                receipt.created.append((w, path))
            for e in changed.values():
                entries.append(e)
                receipt.touched.append(e.key)
        sealed = self._seal(entries, receipt)
        receipt.created_tokens = [self.client.prf(encode_key(w, path))
                                  for w, path in receipt.created]
        self.transport.update(sealed, create=True)
        self.objects[o.id] = o
        for w in o.psi:
            self.groups.setdefault(w, {})[o.id] = o
        return receipt

    def delete_object(self, object_id: str) -> UpdateReceipt:
        o = self.objects.get(object_id)
        if o is None:
            raise NotFound(object_id)
        receipt = UpdateReceipt("delete", object_id)
        entries = []
        for w in sorted(o.psi):
            rest = [m for m in self.groups[w].values() if m.id != object_id]
            arrays = GroupArrays(rest)
            home, changed = self._explore(w, o.p, arrays,
                                          lambda delta: tuple(m for m in delta if m != o),
                                          receipt.stats)
            if home is None or o not in home.delta:
                raise CorruptIndex(f"home cell of {object_id!r} for {w!r} not found")
            for e in changed.values():
                entries.append(e)
                receipt.touched.append(e.key)
        sealed = self._seal(entries, receipt)
        self.transport.update(sealed, create=False)
        del self.objects[object_id]
        for w in o.psi:
            del self.groups[w][object_id]
            if not self.groups[w]:
                del self.groups[w]
        return receipt


def insert_object(o_star: GeoObject, owner: Owner) -> UpdateReceipt:
    return owner.insert_object(o_star)


def delete_object(object_id: str, owner: Owner) -> UpdateReceipt:
    return owner.delete_object(object_id)


__all__ = ["Owner", "UpdateReceipt", "insert_object", "delete_object"]
