"""IndexGen: build every kQ-tree, pad values to one length, encrypt."""
from __future__ import annotations

import math
import random

from .codec import ObjectEncoder, encode_key, serialize_value
from .crypto import SecretKeys, Tokenizer, _aead, encrypt_value
from .errors import EmptyDataset
from .geo import Dataset, group_by_keyword
from .kqtree import build_kq_tree
from .records import SkQTree, SystemParams

# u32 key-block prefix + two (u32 block length + u32 count) object blocks
_VALUE_OVERHEAD = 4 + 2 * 8


def build_plain_trees(d: Dataset, k_max: int) -> dict:
    """One KQTree per keyword, keyed by keyword."""
    if not len(d):
        raise EmptyDataset("dataset has no objects")
    groups = group_by_keyword(d)
    return {w: build_kq_tree(g, w, k_max, d.width, d.bbox_min) for w, g in sorted(groups.items())}


def provisioned_len(values_max: int, d: Dataset, k_max: int, depth: int, slack) -> int:
    """Uniform value length: the longest value, or room for ``slack*k_max``
    residents plus ``k_max`` neighbours if that is larger."""
    if not slack:
        return values_max
    enc = ObjectEncoder()
    obj_max = max(len(enc(o)) for o in d.objects)
    kw_max = max(len(w.encode("utf-8")) for o in d.objects for w in o.psi)
    key_max = 4 + kw_max + depth
    room = _VALUE_OVERHEAD + key_max + (math.ceil(slack * k_max) + k_max) * obj_max
    return max(values_max, room)


def index_gen(d: Dataset, k_max: int, keys: SecretKeys, slack=2.0, rng=None, trees=None):
    """Build the encrypted index.

    Returns ``(SkQTree, SystemParams)``.  Entry order is shuffled so the file
    layout does not mirror tree traversal order; pass ``rng`` for a
    reproducible order.
    """
    if not len(d):
        raise EmptyDataset("dataset has no objects")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if trees is None:
        trees = build_plain_trees(d, k_max)
    enc = ObjectEncoder()
    plain = []
    for w, tree in trees.items():
        for e in tree.entries:
            plain.append((encode_key(w, e.path), serialize_value(e.key, e.delta, e.delta_k, enc)))
    depth = max(t.height for t in trees.values())
    length = provisioned_len(max(len(v) for _, v in plain), d, k_max, depth, slack)

    token = Tokenizer(keys)
    aead = _aead(keys)
    (rng or random.SystemRandom()).shuffle(plain)
    entries = {}
    for key, value in plain:
        entries[token(key)] = encrypt_value(keys, value, length, aead)
    sp = SystemParams(d=depth, W=d.width, x0=d.bbox_min.x, y0=d.bbox_min.y, lam=keys.lam,
                      len=length, k_max=k_max)
    return SkQTree(entries, length), sp
