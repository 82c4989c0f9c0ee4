import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from risk import crypto, synth
from risk.codec import (ObjectEncoder, PlainValue, ValueDecoder, deserialize_value, encode_key,
                        serialize_value)
from risk.errors import CorruptIndex, VersionMismatch
from risk.geo import Dataset, GeoObject
from risk.index import build_plain_trees, index_gen
from risk.records import (SystemParams, index_bytes, load_index, parse_index, save_index,
                          INDEX_VERSION)

keyword = st.text(st.characters(blacklist_categories=("Z", "C", "Cs")), min_size=1, max_size=8)
objects = st.builds(
    lambda i, x, y, ws: GeoObject.make(f"id{i}", x, y, ws),
    st.integers(0, 10**6), st.floats(-1e6, 1e6), st.floats(-1e6, 1e6),
    st.sets(keyword, min_size=1, max_size=3))


class TestCodec:
    def test_empty_neighbour_set(self):
        o = GeoObject.make("a", 1, 2, ["w"])
        v = deserialize_value(serialize_value(("w", "0"), (o,), ()))
        assert v.delta_k == () and v.delta == (o,)

    def test_two_plus_two(self):
        objs = [GeoObject.make(c, i, -i, ["w", "v"]) for i, c in enumerate("abcd")]
        raw = serialize_value(("w", "213"), objs[:2], objs[2:])
        v = deserialize_value(raw)
        assert v == PlainValue("w", "213", tuple(objs[:2]), tuple(objs[2:]))
        assert serialize_value((v.keyword, v.path), v.delta, v.delta_k) == raw

    @given(keyword, st.text("0123", max_size=20), st.lists(objects, max_size=6),
           st.lists(objects, max_size=6))
    def test_round_trip(self, w, path, delta, delta_k):
        raw = serialize_value((w, path), delta, delta_k, ObjectEncoder())
        v = ValueDecoder()(raw)
        assert (v.keyword, v.path, list(v.delta), list(v.delta_k)) == (w, path, delta, delta_k)


@pytest.fixture(scope="module")
def built():
    d = synth.generate(10_000, 30, seed=8)
    keys = crypto.setup(128, seed=8)
    trees = build_plain_trees(d, 40)
    tree, sp = index_gen(d, 40, keys, rng=random.Random(1), trees=trees)
    return d, keys, trees, tree, sp


class TestIndexGen:
    def test_entry_count_matches_recount(self, built):
        d, keys, trees, tree, sp = built
        recount = sum(len(t.entries) for t in trees.values())
        assert tree.count == recount
        tok = crypto.Tokenizer(keys)
        expected = {tok(encode_key(w, e.path)) for w, t in trees.items() for e in t.entries}
        assert set(tree.entries) == expected

    def test_height_and_params(self, built):
        d, keys, trees, tree, sp = built
        assert sp.d == max(t.height for t in trees.values())
        assert (sp.W, sp.x0, sp.y0, sp.k_max, sp.lam) == (d.width, d.bbox_min.x, d.bbox_min.y,
                                                           40, 128)

    def test_uniform_ciphertext_length(self, built):
        tree = built[3]
        assert len(tree.ciphertext_lengths()) == 1

    def test_values_decrypt_to_plain_tree(self, built):
        d, keys, trees, tree, sp = built
        tok = crypto.Tokenizer(keys)
        for w, t in list(trees.items())[:5]:
            for e in t.entries[:20]:
                ct = tree.entries[tok(encode_key(w, e.path))]
                v = deserialize_value(crypto.decrypt_value(keys, ct))
                assert (v.keyword, v.path, v.delta, v.delta_k) == (w, e.path, e.delta, e.delta_k)

    def test_save_load_bit_exact(self, built, tmp_path):
        tree, sp = built[3], built[4]
        path = tmp_path / "ix.bin"
        save_index(path, tree, sp)
        tree2, sp2 = load_index(path)
        assert tree2.entries == tree.entries and tree2.len == tree.len
        assert (sp2.d, sp2.W, sp2.x0, sp2.y0, sp2.lam) == (sp.d, sp.W, sp.x0, sp.y0, sp.lam)
        assert index_bytes(tree2, sp2) == path.read_bytes()

    def test_corruption_detected(self, built):
        tree, sp = built[3], built[4]
        raw = bytearray(index_bytes(tree, sp))
        with pytest.raises(CorruptIndex):
            parse_index(bytes(raw[:-1]))
        with pytest.raises(CorruptIndex):
            parse_index(b"XXXX" + bytes(raw[4:]))
        raw[4] = INDEX_VERSION + 1
        with pytest.raises(VersionMismatch):
            parse_index(bytes(raw))


def test_height_is_max_over_keywords():
    # keyword a is packed into one corner and splits deep; keyword b stays at level 1
    pts = [("p0", 0, 0, "a"), ("p1", 0.5, 0.5, "a"), ("p2", 0.9, 0.2, "a"),
           ("q0", 7, 1, "b"), ("q1", 1, 7, "b"), ("z", 8, 8, "b")]
    d = Dataset.from_objects(GeoObject.make(i, x, y, [w]) for i, x, y, w in pts)
    trees = build_plain_trees(d, 1)
    _, sp = index_gen(d, 1, crypto.setup(128, seed=0), trees=trees)
    assert trees["a"].height > trees["b"].height == 1
    assert sp.d == trees["a"].height


def test_system_params_json(tmp_path):
    sp = SystemParams(d=3, W=8.0, x0=-1.0, y0=2.0, lam=128, len=100, k_max=4)
    path = tmp_path / "sp.json"
    sp.save(path)
    assert SystemParams.load(path) == sp
    assert sp.finest_width == 1.0
