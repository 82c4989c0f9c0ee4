"""Canonical binary encodings for PRF keys and kQ-tree values.

Key:    u32 len(keyword) | keyword utf-8 | path ascii digits
Object: u16 len(id) | id | f64 x | f64 y | u16 n | n * (u16 len | keyword)
Value:  block(key) | block(count | objects of Delta) | block(count | objects of Delta^k)
        where block(b) = u32 len(b) | b

All integers are little-endian.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

from .geo import GeoObject, Point

_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
_XY = struct.Struct("<dd")


def encode_key(keyword: str, path: str) -> bytes:
    kw = keyword.encode("utf-8")
    return _U32.pack(len(kw)) + kw + path.encode("ascii")


def decode_key(data: bytes):
    (n,) = _U32.unpack_from(data, 0)
    return data[4:4 + n].decode("utf-8"), data[4 + n:].decode("ascii")


def _str16(s: str) -> bytes:
    b = s.encode("utf-8")
    if len(b) > 0xFFFF:
        raise ValueError("string too long to encode")
    return _U16.pack(len(b)) + b


def encode_object(o: GeoObject) -> bytes:
    words = sorted(o.psi)
    return b"".join([_str16(o.id), _XY.pack(o.p.x, o.p.y), _U16.pack(len(words)),
                     *(_str16(w) for w in words)])


@dataclass(frozen=True)
class PlainValue:
    keyword: str
    path: str
    delta: tuple
    delta_k: tuple


class ObjectEncoder:
    """Memoizes object encodings; every object appears in many values."""

    def __init__(self):
        self._cache = {}

    def __call__(self, o: GeoObject) -> bytes:
        hit = self._cache.get(o.id)
        if hit is None or hit[0] is not o:
            hit = (o, encode_object(o))
            self._cache[o.id] = hit
        return hit[1]


def _objects_block(objs, enc) -> bytes:
    body = _U32.pack(len(objs)) + b"".join(enc(o) for o in objs)
    return _U32.pack(len(body)) + body


def serialize_value(e, delta, delta_k, encoder=None) -> bytes:
    """Encode ``v = (e, Delta, Delta^k)`` with ``e = (keyword, path)``."""
    enc = encoder or ObjectEncoder()
    key = encode_key(*e)
    return b"".join([_U32.pack(len(key)), key, _objects_block(delta, enc),
                     _objects_block(delta_k, enc)])


def object_size_bound(o: GeoObject) -> int:
    return len(encode_object(o))


class ValueDecoder:
    """Decodes values, interning objects by their encoded bytes."""

    def __init__(self):
        self._objects = {}

    def _objects_at(self, data, off):
        (blen,) = _U32.unpack_from(data, off)
        off += 4
        end = off + blen
        (count,) = _U32.unpack_from(data, off)
        off += 4
        out = []
        cache = self._objects
        for _ in range(count):
            start = off
            (n,) = _U16.unpack_from(data, off)
            off += 2 + n + 16
            (nk,) = _U16.unpack_from(data, off)
            off += 2
            for _ in range(nk):
                (m,) = _U16.unpack_from(data, off)
                off += 2 + m
            raw = data[start:off]
            obj = cache.get(raw)
            if obj is None:
                obj = _parse_object(raw)
                cache[raw] = obj
            out.append(obj)
        if off != end:
            raise ValueError("object block length mismatch")
        return tuple(out), end

    def __call__(self, data: bytes) -> PlainValue:
        (klen,) = _U32.unpack_from(data, 0)
        keyword, path = decode_key(data[4:4 + klen])
        delta, off = self._objects_at(data, 4 + klen)
        delta_k, off = self._objects_at(data, off)
        if off != len(data):
            raise ValueError("trailing bytes after value")
        return PlainValue(keyword, path, delta, delta_k)


def _parse_object(raw: bytes) -> GeoObject:
    (n,) = _U16.unpack_from(raw, 0)
    oid = raw[2:2 + n].decode("utf-8")
    off = 2 + n
    x, y = _XY.unpack_from(raw, off)
    off += 16
    (nk,) = _U16.unpack_from(raw, off)
    off += 2
    words = []
    for _ in range(nk):
        (m,) = _U16.unpack_from(raw, off)
        words.append(raw[off + 2:off + 2 + m].decode("utf-8"))
        off += 2 + m
    return GeoObject(oid, Point(x, y), frozenset(words))


def deserialize_value(data: bytes) -> PlainValue:
    return ValueDecoder()(data)
