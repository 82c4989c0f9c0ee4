"""Acceptance suite: one test per criterion, each printing a pass/fail line.

The terminal summary (see conftest) repeats the verdicts at the end of the run.
"""
import itertools
import random
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import long_keyword_dataset, make_system, wire_leaks
from risk import crypto, synth
from risk.bench import Workload, cmd_bench
from risk.codec import ObjectEncoder, PlainValue, ValueDecoder, encode_key, serialize_value
from risk.cover import cover_identifiers
from risk.geo import Dataset, GeoObject, Point, QuerySpec
from risk.kqtree import path_cell
from risk.oracle import oracle_knn, oracle_range
from risk.protocol import Msg, frame
from risk.records import SystemParams, index_bytes, load_index, save_index
from risk.trapdoor import TrapdoorSession, k_trapdoor_phase2, n_trapdoor, r_trapdoor
from risk.updates import Owner

pytestmark = pytest.mark.slow

# (objects, keywords, distribution, k_max)
CONFIGS = [
    (10_000, 20, synth.UNIFORM, 10),
    (10_000, 200, synth.GAUSSIAN, 20),
    (15_000, 50, synth.GAUSSIAN, 40),
    (20_000, 100, synth.UNIFORM, 10),
    (25_000, 200, synth.UNIFORM, 20),
    (30_000, 20, synth.GAUSSIAN, 40),
    (35_000, 150, synth.GAUSSIAN, 10),
    (40_000, 80, synth.UNIFORM, 20),
    (45_000, 120, synth.GAUSSIAN, 40),
    (50_000, 200, synth.UNIFORM, 20),
]
SPARSE = {"rare": 2, "scarce": 8}


def report(number, ok, detail):
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")


def with_sparse_keywords(d: Dataset, seed: int) -> Dataset:
    """Tag a few random objects with keywords that are far rarer than any k tested."""
    rng = random.Random(seed)
    extra = {}
    for w, count in SPARSE.items():
        for i in rng.sample(range(len(d)), count):
            extra.setdefault(i, []).append(w)
    objs = [GeoObject.make(o.id, o.p.x, o.p.y, list(o.psi) + extra.get(i, []))
            for i, o in enumerate(d.objects)]
    return Dataset.from_objects(objs)


@pytest.fixture(scope="module")
def systems():
    out = []
    for i, (n, kw, dist, k_max) in enumerate(CONFIGS):
        d = with_sparse_keywords(synth.generate(n, kw, dist, seed=100 + i), seed=i)
        keys, tree, sp, cloud, transport, client = make_system(d, k_max, seed=i)
        counts = {}
        for o in d.objects:
            for w in o.psi:
                counts[w] = counts.get(w, 0) + 1
        out.append((d, tree, sp, client, counts))
    return out


def query_keywords(rng, o):
    ws = sorted(o.psi)
    return rng.sample(ws, rng.randint(1, min(3, len(ws))))


@pytest.mark.criterion(1, "range queries equal the oracle on 10 datasets")
def test_criterion_1_range_oracle(systems):
    t0 = time.perf_counter()
    mismatches = total = nonempty = 0
    for i, (d, tree, sp, client, counts) in enumerate(systems):
        rng = random.Random(1000 + i)
        for _ in range(100):
            o = rng.choice(d.objects)
            x, y = o.p.x + rng.gauss(0, 0.01 * d.width), o.p.y + rng.gauss(0, 0.01 * d.width)
            q = QuerySpec.range(x, y, query_keywords(rng, o), rng.uniform(0.01, 0.05) * d.width)
            got = client.run_range(q)
            want = oracle_range(d, q)
            total += 1
            nonempty += bool(want.ids)
            if set(got.ids) != set(want.ids) or len(got.ids) != len(want.ids) or not got.exact:
                mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0
    report(1, ok, f"{total} queries, {nonempty} non-empty, {mismatches} mismatches, "
                  f"{elapsed:.1f}s")
    assert ok


@pytest.mark.criterion(2, "kNN queries equal the oracle, sparse keywords included")
def test_criterion_2_knn_oracle(systems):
    t0 = time.perf_counter()
    mismatches = total = sparse = supplementary = 0
    for i, (d, tree, sp, client, counts) in enumerate(systems):
        rng = random.Random(2000 + i)
        for j in range(100):
            k = rng.choice([1, 2, 5, 10])
            if j % 5 == 0:
                pool = sorted(w for w, c in counts.items() if c <= 2 * k)
                ws = [rng.choice(pool)]
                x, y = rng.uniform(sp.x0, sp.x0 + sp.W), rng.uniform(sp.y0, sp.y0 + sp.W)
                sparse += 1
            else:
                o = rng.choice(d.objects)
                ws = query_keywords(rng, o)
                if j % 2:
                    x, y = rng.uniform(sp.x0, sp.x0 + sp.W), rng.uniform(sp.y0, sp.y0 + sp.W)
                else:
                    x, y = o.p.x, o.p.y
            q = QuerySpec.knn(x, y, ws, k)
            got = client.run_knn(q)
            total += 1
            supplementary += got.stats.rounds > 2
            if got.ids != oracle_knn(d, q).ids or not got.exact:
                mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and supplementary > 0
    report(2, ok, f"{total} queries ({sparse} sparse-keyword, {supplementary} with supplementary "
                  f"rounds), {mismatches} mismatches, {elapsed:.1f}s")
    assert ok


@pytest.mark.criterion(3, "worked cover example reproduced")
def test_criterion_3_worked_example():
    sp = SystemParams(d=3, W=8.0, x0=0.0, y0=0.0, lam=128, len=256, k_max=1)
    rsk = cover_identifiers(Point(1.5, 3.0), 0.3, 3, 8.0)
    nsk = cover_identifiers(Point(4.5, 5.5), 0.0, 3, 8.0)
    keys = crypto.setup(128, seed=0)
    tok = crypto.Tokenizer(keys)
    q = QuerySpec.knn(4.5, 5.5, ["w"], 2)
    session = TrapdoorSession(q.psi, sp, keys)
    n_trapdoor(q, sp, keys, session)
    td = k_trapdoor_phase2(q, [PlainValue("w", "302", (), ())], 0, sp, keys, session)
    paths = ["".join(t) for n in range(1, 4) for t in itertools.product("0123", repeat=n)]
    by_token = {tok(encode_key("w", p)): p for p in paths}
    phase2 = {by_token[t] for t in td.tokens}
    expect2 = {"300", "301", "303", "32", "320", "321", "2", "23", "231", "21", "211", "213"}
    ok = (set(rsk) == {"0", "02", "021", "023"} and len(rsk) == 4
          and set(nsk) == {"3", "30", "302"} and len(nsk) == 3
          and phase2 == expect2 and len(td.tokens) == 12)
    report(3, ok, f"range {rsk}, nearest {nsk}, phase two {sorted(phase2)}")
    assert ok


@pytest.mark.criterion(4, "leakage-profile invariants")
def test_criterion_4_leakage(systems):
    # (a) one ciphertext length per index
    lengths_ok = all(len(tree.ciphertext_lengths()) == 1 for _, tree, *_ in systems)

    # (b) no decryption path in the cloud, and repeated trapdoors get identical bytes
    code = ("import sys, risk.cloud\n"
            "print(any(m.startswith(('cryptography', 'risk.crypto', 'risk.codec',"
            " 'risk.trapdoor', 'risk.client')) for m in sys.modules))")
    isolated = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                              check=True).stdout.strip() == "False"
    d, tree, sp, client, counts = systems[3]
    cloud = client.transport.cloud
    rng = random.Random(4)
    identical = True
    for _ in range(50):
        o = rng.choice(d.objects)
        td = r_trapdoor(QuerySpec.range(o.p.x, o.p.y, sorted(o.psi)[:1], 0.02 * d.width),
                        sp, client.keys)
        raw = frame(Msg.QUERY, td.encode())
        identical &= cloud.handle_frame(raw) == cloud.handle_frame(raw)

    # (c) a capture of 1000 queries carries no plaintext
    ld = long_keyword_dataset(5000, seed=9)
    keys, tree2, sp2, cloud2, transport, client2 = make_system(ld, 16, seed=9, capture=True)
    rng = random.Random(44)
    queries = []
    for j in range(1000):
        o = rng.choice(ld.objects)
        x, y = o.p.x + rng.uniform(-5, 5), o.p.y + rng.uniform(-5, 5)
        ws = sorted(o.psi)[:2]
        if j % 2:
            queries.append(QuerySpec.range(x, y, ws, rng.uniform(0.01, 0.05) * ld.width))
        else:
            queries.append(QuerySpec.knn(x, y, ws, rng.choice([1, 2, 5, 10])))
    for q in queries:
        (client2.run_range if q.kind == "range" else client2.run_knn)(q)
    leaks = wire_leaks(transport.capture, queries)
    lengths_ok &= len(tree2.ciphertext_lengths()) == 1

    ok = lengths_ok and isolated and identical and not leaks
    report(4, ok, f"uniform lengths={lengths_ok}, cloud isolated={isolated}, "
                  f"repeatable responses={identical}, {len(transport.capture)} frames captured, "
                  f"{len(leaks)} plaintext hits")
    assert ok


@pytest.mark.criterion(5, "500 interleaved updates keep queries exact")
def test_criterion_5_updates():
    t0 = time.perf_counter()
    d = synth.generate(10_000, 50, synth.GAUSSIAN, seed=55)
    keys, tree, sp, cloud, transport, client = make_system(d, 16, seed=5)
    owner = Owner(d, keys, sp, transport)
    rng = random.Random(5)
    keywords = sorted(owner.groups)
    initial = set(cloud.map)
    created = set()
    mismatches = checks = 0
    stable = True
    for step in range(1, 501):
        if rng.random() < 0.5:
            o = GeoObject.make(f"u{step:04d}", rng.uniform(sp.x0, sp.x0 + sp.W),
                               rng.uniform(sp.y0, sp.y0 + sp.W),
                               rng.sample(keywords, rng.randint(1, 3)))
            r = owner.insert_object(o)
            stable &= len(r.created) <= len(o.psi)
            created |= set(r.created_tokens)
        else:
            r = owner.delete_object(rng.choice(sorted(owner.objects)))
            stable &= not r.created
        stable &= set(cloud.map) == initial | created
        if step % 50 == 0:
            cur = owner.dataset()
            for j in range(20):
                o = rng.choice(cur.objects)
                ws = sorted(o.psi)[:rng.randint(1, 2)]
                if j % 2:
                    q = QuerySpec.range(o.p.x, o.p.y, ws, rng.uniform(0.01, 0.05) * sp.W)
                    ok = client.run_range(q).ids == oracle_range(cur, q).ids
                else:
                    q = QuerySpec.knn(rng.uniform(0, 1000), rng.uniform(0, 1000), ws,
                                      rng.choice([1, 2, 5, 10]))
                    ok = client.run_knn(q).ids == oracle_knn(cur, q).ids
                checks += 1
                mismatches += not ok
    ok = mismatches == 0 and stable
    report(5, ok, f"500 mutations, {checks} checked queries, {mismatches} mismatches, "
                  f"{len(created)} created entries, token set stable={stable}, "
                  f"{time.perf_counter() - t0:.1f}s")
    assert ok


@pytest.mark.criterion(6, "k_max trends on 100k objects")
def test_criterion_6_trends():
    d = synth.generate(100_000, 100, synth.UNIFORM, seed=0)
    rows = cmd_bench(d, [2, 10, 40, 80], Workload(seed=0), seed=0, runs=3)
    entries = [r["entries"] for r in rows]
    build = [r["build_s_median"] for r in rows]
    rsk = [r["rsk_total_ms_median"] for r in rows]
    ok_entries = all(a >= b for a, b in zip(entries, entries[1:]))
    ok_build = all(a >= b for a, b in zip(build, build[1:]))
    ratio = rsk[0] / rsk[-1]
    ok = ok_entries and ok_build and ratio >= 2
    report(6, ok, f"entries {entries}, build_s {[round(b, 2) for b in build]}, "
                  f"rsk_ms {[round(t, 3) for t in rsk]} (k_max 2 vs 80: {ratio:.1f}x)")
    assert ok


def brute_finest(px, py, r, d, W):
    n = 1 << d
    side = W / n
    k = np.arange(n)

    def meets(lo, hi):
        lo, hi = max(lo, 0.0), min(hi, W)
        if lo > hi:
            return k[:0]
        return k[(k * side <= hi) & ((lo < (k + 1) * side) | (k == n - 1))]

    return meets(px - r, px + r), meets(py - r, py + r)


@pytest.mark.criterion(7, "cover sets complete and prefix-closed")
def test_criterion_7_cover_completeness():
    rng = np.random.default_rng(7)
    violations = 0
    for _ in range(10_000):
        d = int(rng.integers(1, 7))
        W = float(rng.choice([1.0, 8.0, 1000.0, 3.7]))
        px, py = rng.uniform(-0.2, 1.2, 2) * W
        r = float(rng.uniform(0, 0.5) * W) if rng.random() < 0.9 else 0.0
        ids = cover_identifiers(Point(px, py), r, d, W)
        s = set(ids)
        if len(s) != len(ids) or any(len(p) > 1 and p[:-1] not in s for p in ids):
            violations += 1
            continue
        got = {path_cell(p) for p in ids if len(p) == d}
        xs, ys = brute_finest(px, py, r, d, W)
        want = {(int(a), int(b)) for a in xs for b in ys}
        violations += bool(want - got)
    ok = violations == 0
    report(7, ok, f"10000 random (p, r, d<=6) triples, {violations} violations")
    assert ok


def random_object(rng, i):
    words = ["".join(rng.choice("abcdefghé中") for _ in range(rng.randint(1, 9)))
             for _ in range(rng.randint(1, 4))]
    return GeoObject.make(f"id{i}-{rng.getrandbits(20)}", rng.uniform(-1e6, 1e6),
                          rng.uniform(-1e6, 1e6), words)


@pytest.mark.criterion(8, "value and index round trips")
def test_criterion_8_round_trips(tmp_path, systems):
    rng = random.Random(8)
    keys = crypto.setup(192, seed=8)
    enc, dec = ObjectEncoder(), ValueDecoder()
    failures = 0
    for i in range(10_000):
        delta = tuple(random_object(rng, f"{i}d{j}") for j in range(rng.randint(0, 5)))
        delta_k = tuple(random_object(rng, f"{i}k{j}") for j in range(rng.randint(0, 5)))
        w = "".join(rng.choice("xyzü") for _ in range(rng.randint(1, 6)))
        path = "".join(rng.choice("0123") for _ in range(rng.randint(1, 20)))
        raw = serialize_value((w, path), delta, delta_k, enc)
        ct = crypto.encrypt_value(keys.sk_E, raw, len(raw) + rng.randint(0, 64))
        v = dec(crypto.decrypt_value(keys.sk_E, ct))
        failures += (v.keyword, v.path, v.delta, v.delta_k) != (w, path, delta, delta_k)
    exact = True
    for j, (_, tree, sp, *_rest) in enumerate(systems[:4]):
        path = tmp_path / f"ix{j}.bin"
        save_index(path, tree, sp)
        tree2, sp2 = load_index(path)
        exact &= index_bytes(tree2, sp2) == path.read_bytes() and tree2.entries == tree.entries
    ok = failures == 0 and exact
    report(8, ok, f"10000 values, {failures} failures; index save/load bit-exact={exact}")
    assert ok
