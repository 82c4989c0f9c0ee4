"""Encrypted index records, system parameters, and the on-disk index format.

Nothing here can decrypt: the cloud side imports this module to load and
serve an index without ever touching key material.
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field

from .errors import CorruptIndex, VersionMismatch

NONCE_LEN = 12
TAG_LEN = 16
# padding length prefix carried inside every ciphertext body
LEN_PREFIX = 4

INDEX_MAGIC = b"RSKI"
INDEX_VERSION = 1
# magic, version, lambda, d, W, x0, y0, len, count
_HEADER = struct.Struct("<4sHHHdddII")


@dataclass(frozen=True)
class Ciphertext:
    nonce: bytes
    body: bytes
    tag: bytes

    def __len__(self):
        return len(self.nonce) + len(self.body) + len(self.tag)

    def to_bytes(self) -> bytes:
        return self.nonce + self.body + self.tag


@dataclass(frozen=True)
class EncryptedEntry:
    token: bytes
    ct: Ciphertext


@dataclass
class SystemParams:
    """Public parameters handed to every client.

    ``d`` and ``W`` drive trapdoor generation; ``x0``/``y0`` anchor the
    bounding square; ``len`` and ``k_max`` are needed by the data owner for
    updates.
    """
    d: int
    W: float
    x0: float = 0.0
    y0: float = 0.0
    lam: int = 128
    len: int = 0
    k_max: int = 0
    hash: str = "HMAC-SHA256"
    cipher: str = "AES-GCM"

    @property
    def finest_width(self) -> float:
        return self.W * 2.0 ** (-self.d)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SystemParams":
        return cls(**json.loads(text))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "SystemParams":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


@dataclass
class SkQTree:
    """Token -> ciphertext map plus the uniform padded value length."""
    entries: dict = field(default_factory=dict)
    len: int = 0

    @property
    def count(self) -> int:
        return len(self.entries)

    def ciphertext_lengths(self) -> set:
        return {len(ct) for ct in self.entries.values()}


def save_index(path, tree: SkQTree, sp: SystemParams) -> None:
    """Write the index in its current entry order (randomized at build time)."""
    with open(path, "wb") as fh:
        fh.write(index_bytes(tree, sp))


def index_bytes(tree: SkQTree, sp: SystemParams) -> bytes:
    tok_len = sp.lam // 8
    parts = [_HEADER.pack(INDEX_MAGIC, INDEX_VERSION, sp.lam, sp.d, sp.W, sp.x0, sp.y0,
                          tree.len, tree.count)]
    for token, ct in tree.entries.items():
        if len(token) != tok_len or len(ct.nonce) != NONCE_LEN or len(ct.tag) != TAG_LEN:
            raise CorruptIndex("record with non-uniform field sizes")
        if len(ct.body) != tree.len + LEN_PREFIX:
            raise CorruptIndex("record body length differs from len")
        parts.append(token)
        parts.append(ct.nonce)
        parts.append(ct.body)
        parts.append(ct.tag)
    return b"".join(parts)


def load_index(path):
    """Return ``(SkQTree, SystemParams)``; only public header fields are restored."""
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_index(data)


def parse_index(data: bytes):
    if len(data) < _HEADER.size:
        raise CorruptIndex("truncated header")
    magic, version, lam, d, W, x0, y0, vlen, count = _HEADER.unpack_from(data, 0)
    if magic != INDEX_MAGIC:
        raise CorruptIndex("bad magic")
    if version != INDEX_VERSION:
        raise VersionMismatch(f"index version {version}, expected {INDEX_VERSION}")
    if lam % 8 or lam < 128:
        raise CorruptIndex(f"bad lambda {lam}")
    tok_len = lam // 8
    body_len = vlen + LEN_PREFIX
    rec = tok_len + NONCE_LEN + body_len + TAG_LEN
    if len(data) != _HEADER.size + count * rec:
        raise CorruptIndex("record section length does not match header")
    entries = {}
    off = _HEADER.size
    for _ in range(count):
        token = data[off:off + tok_len]
        off += tok_len
        nonce = data[off:off + NONCE_LEN]
        off += NONCE_LEN
        body = data[off:off + body_len]
        off += body_len
        tag = data[off:off + TAG_LEN]
        off += TAG_LEN
        if token in entries:
            raise CorruptIndex("duplicate token")
        entries[token] = Ciphertext(nonce, body, tag)
    sp = SystemParams(d=d, W=W, x0=x0, y0=y0, lam=lam, len=vlen)
    return SkQTree(entries, vlen), sp
