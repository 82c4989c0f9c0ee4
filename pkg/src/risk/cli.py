"""Command-line entry point (``risk``)."""
from __future__ import annotations

import csv
import json
import logging
import os
import sys
import time

import click

from . import kernels, synth
from .bench import COLUMNS, Workload, cmd_bench, to_csv
from .client import Client
from .cloud import CloudIndex, serve
from .crypto import load_keys, save_keys, setup
from .errors import RiskError
from .geo import GeoObject, QuerySpec, distance, load_dataset, save_dataset
from .index import index_gen
from .oracle import oracle
from .records import SystemParams, save_index
from .transport import LoopbackTransport, TcpTransport
from .updates import Owner

KEY_ENV = "RISK_KEY_FILE"
FORMATS = click.Choice(["json", "csv"])


def _key_path(key_file):
    path = os.environ.get(KEY_ENV) or key_file
    if not path:
        raise click.UsageError(f"pass --key-file or set {KEY_ENV}")
    return path


def _sp_path(index_path, sp_path):
    return sp_path or f"{index_path}.sp.json"


def _emit(payload: dict, rows: list, fields: list, fmt: str):
    if fmt == "json":
        click.echo(json.dumps(payload, indent=2, sort_keys=True))
        return
    writer = csv.DictWriter(sys.stdout, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow(r)


def _object_rows(q, objects):
    return [{"rank": i + 1, "id": o.id, "x": o.p.x, "y": o.p.y,
             "distance": distance(o.p.x, o.p.y, q.p.x, q.p.y),
             "keywords": " ".join(sorted(o.psi))} for i, o in enumerate(objects)]


_ROW_FIELDS = ["rank", "id", "x", "y", "distance", "keywords"]


def _open_transport(server, index, sp):
    if server:
        return TcpTransport(server, sp.lam // 8)
    if index:
        return LoopbackTransport(CloudIndex.from_file(index))
    raise click.UsageError("pass --server HOST:PORT or --index PATH")


def _parse_keywords(values):
    words = [w for v in values for w in v.replace(",", " ").split()]
    if not words:
        raise click.UsageError("at least one --keyword is required")
    return words


@click.group()
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
def main(verbose):
    """Encrypted spatial-keyword index: build, serve, query, update, benchmark."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--n", "n", type=int, required=True, help="Number of objects.")
@click.option("--keywords", type=int, default=50, show_default=True)
@click.option("--distribution", type=click.Choice([synth.UNIFORM, synth.GAUSSIAN]),
              default=synth.UNIFORM, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--format", "fmt", type=FORMATS, default="json", show_default=True)
def gen(n, keywords, distribution, seed, out, fmt):
    """Write a synthetic TSV dataset."""
    d = synth.generate(n, keywords, distribution, seed)
    save_dataset(out, d)
    info = {"path": out, "objects": len(d), "keywords": keywords, "distribution": distribution,
            "seed": seed}
    _emit(info, [info], list(info), fmt)


@main.command()
@click.option("--dataset", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--k-max", type=int, default=40, show_default=True)
@click.option("--key-file", type=click.Path(dir_okay=False))
@click.option("--out-index", type=click.Path(dir_okay=False), required=True)
@click.option("--sp", "sp_path", type=click.Path(dir_okay=False),
              help="Public-parameter file (default: <index>.sp.json).")
@click.option("--lambda", "lam", type=int, default=128, show_default=True)
@click.option("--slack", type=float, default=2.0, show_default=True,
              help="Resident capacity reserved for updates, in multiples of k_max.")
@click.option("--format", "fmt", type=FORMATS, default="json", show_default=True)
def build(dataset, k_max, key_file, out_index, sp_path, lam, slack, fmt):
    """Build and encrypt an index; creates the key file if it does not exist."""
    path = _key_path(key_file)
    if os.path.exists(path):
        keys = load_keys(path)
    else:
        keys = setup(lam)
        save_keys(path, keys)
    d = load_dataset(dataset)
    t0 = time.perf_counter()
    tree, sp = index_gen(d, k_max, keys, slack=slack)
    elapsed = time.perf_counter() - t0
    save_index(out_index, tree, sp)
    sp.save(_sp_path(out_index, sp_path))
    info = {"index": out_index, "sp": _sp_path(out_index, sp_path), "entries": tree.count,
            "height": sp.d, "len": sp.len, "build_s": round(elapsed, 4)}
    _emit(info, [info], list(info), fmt)


@main.command("serve")
@click.option("--index", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--listen", default="127.0.0.1:7700", show_default=True)
def serve_cmd(index, listen):
    """Serve an index over TCP until interrupted."""
    logging.getLogger().setLevel(min(logging.getLogger().level, logging.INFO))

    def ready(server):
        host, port = server.server_address[:2]
        click.echo(f"listening on {host}:{port}", err=True)

    try:
        serve(listen, index, ready=ready)
    except KeyboardInterrupt:
        pass


def _query_options(f):
    for opt in reversed([
        click.option("--x", type=float, required=True),
        click.option("--y", type=float, required=True),
        click.option("--keyword", "keywords", multiple=True, required=True,
                     help="Query keyword; repeat or comma-separate for several."),
        click.option("--sp", "sp_path", type=click.Path(exists=True, dir_okay=False),
                     required=True),
        click.option("--key-file", type=click.Path(dir_okay=False)),
        click.option("--server", help="HOST:PORT of a running `risk serve`."),
        click.option("--index", type=click.Path(exists=True, dir_okay=False),
                     help="Query an index file in-process instead of a server."),
        click.option("--format", "fmt", type=FORMATS, default="json", show_default=True),
    ]):
        f = opt(f)
    return f


def _run_query(q, sp_path, key_file, server, index, fmt):
    sp = SystemParams.load(sp_path)
    keys = load_keys(_key_path(key_file))
    kernels.warm_up()
    with _open_transport(server, index, sp) as tr:
        client = Client(tr, keys, sp)
        res = client.run_range(q) if q.kind == "range" else client.run_knn(q)
    s = res.stats
    payload = {
        "kind": q.kind, "exact": res.exact, "count": len(res),
        "results": _object_rows(q, res.objects),
        "timing": {"trapdoor_ms": s.trapdoor_s * 1e3, "cloud_ms": s.cloud_s * 1e3,
                   "client_ms": s.client_s * 1e3},
        "traffic": {"bytes_sent": s.bytes_sent, "bytes_received": s.bytes_received,
                    "rounds": s.rounds, "tokens": s.tokens, "entries": s.entries},
    }
    _emit(payload, payload["results"], _ROW_FIELDS, fmt)
    if fmt == "csv":
        for k, v in {**payload["timing"], **payload["traffic"]}.items():
            click.echo(f"# {k}={v}", err=True)


@main.command("query-range")
@_query_options
@click.option("--r", "radius", type=float, required=True)
def query_range(x, y, keywords, sp_path, key_file, server, index, fmt, radius):
    """Encrypted range query."""
    q = QuerySpec.range(x, y, _parse_keywords(keywords), radius)
    _run_query(q, sp_path, key_file, server, index, fmt)


@main.command("query-knn")
@_query_options
@click.option("--k", type=int, default=1, show_default=True)
def query_knn(x, y, keywords, sp_path, key_file, server, index, fmt, k):
    """Encrypted k-nearest-neighbour query."""
    q = QuerySpec.knn(x, y, _parse_keywords(keywords), k)
    _run_query(q, sp_path, key_file, server, index, fmt)


def _owner(dataset, sp_path, key_file, server, index):
    sp = SystemParams.load(sp_path)
    keys = load_keys(_key_path(key_file))
    tr = _open_transport(server, index, sp)
    return Owner(load_dataset(dataset), keys, sp, tr), tr


def _update_options(f):
    for opt in reversed([
        click.option("--dataset", type=click.Path(exists=True, dir_okay=False), required=True,
                     help="Owner's plaintext dataset; rewritten after the update."),
        click.option("--sp", "sp_path", type=click.Path(exists=True, dir_okay=False),
                     required=True),
        click.option("--key-file", type=click.Path(dir_okay=False)),
        click.option("--server", help="HOST:PORT of a running `risk serve`."),
        click.option("--format", "fmt", type=FORMATS, default="json", show_default=True),
    ]):
        f = opt(f)
    return f


def _receipt(r, fmt):
    info = {"kind": r.kind, "id": r.object_id, "touched": len(r.touched),
            "created": len(r.created), "rounds": r.stats.rounds}
    _emit(info, [info], list(info), fmt)


@main.command()
@_update_options
@click.option("--id", "oid", required=True)
@click.option("--x", type=float, required=True)
@click.option("--y", type=float, required=True)
@click.option("--keyword", "keywords", multiple=True, required=True)
def insert(dataset, sp_path, key_file, server, fmt, oid, x, y, keywords):
    """Insert one object through a running server."""
    owner, tr = _owner(dataset, sp_path, key_file, server, None)
    with tr:
        r = owner.insert_object(GeoObject.make(oid, x, y, _parse_keywords(keywords)))
    save_dataset(dataset, owner.dataset())
    _receipt(r, fmt)


@main.command()
@_update_options
@click.option("--id", "oid", required=True)
def delete(dataset, sp_path, key_file, server, fmt, oid):
    """Delete one object through a running server."""
    owner, tr = _owner(dataset, sp_path, key_file, server, None)
    with tr:
        r = owner.delete_object(oid)
    save_dataset(dataset, owner.dataset())
    _receipt(r, fmt)


@main.command()
@click.option("--dataset", type=click.Path(exists=True, dir_okay=False),
              help="TSV dataset; omit to generate one with --n.")
@click.option("--n", "n", type=int, default=100_000, show_default=True)
@click.option("--keywords", "n_keywords", type=int, default=100, show_default=True)
@click.option("--distribution", type=click.Choice([synth.UNIFORM, synth.GAUSSIAN]),
              default=synth.UNIFORM, show_default=True)
@click.option("--k-max", "k_values", default="2,10,40,80", show_default=True)
@click.option("--queries", type=int, default=100, show_default=True)
@click.option("--radius", type=float, default=0.01, show_default=True,
              help="Range radius as a fraction of the bounding-square width.")
@click.option("--k", type=int, default=10, show_default=True)
@click.option("--runs", type=int, default=5, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), help="Also write the CSV here.")
@click.option("--format", "fmt", type=FORMATS, default="csv", show_default=True)
def bench(dataset, n, n_keywords, distribution, k_values, queries, radius, k, runs, workers,
          seed, out, fmt):
    """Sweep k_max; one row per value."""
    d = load_dataset(dataset) if dataset else synth.generate(n, n_keywords, distribution, seed)
    ks = [int(v) for v in k_values.split(",") if v.strip()]
    rows = cmd_bench(d, ks, Workload(queries, radius, k, seed), seed, runs, workers,
                     progress=lambda r: click.echo(f"k_max={r['k_max']} done", err=True))
    text = to_csv(rows)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    if fmt == "csv":
        click.echo(text, nl=False)
    else:
        click.echo(json.dumps({"columns": COLUMNS, "rows": rows}, indent=2))


@main.command("oracle")
@click.option("--dataset", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--kind", type=click.Choice(["range", "knn"]), required=True)
@click.option("--x", type=float, required=True)
@click.option("--y", type=float, required=True)
@click.option("--keyword", "keywords", multiple=True, required=True)
@click.option("--r", "radius", type=float, default=0.0)
@click.option("--k", type=int, default=1)
@click.option("--format", "fmt", type=FORMATS, default="json", show_default=True)
def oracle_cmd(dataset, kind, x, y, keywords, radius, k, fmt):
    """Plaintext brute-force answer, for debugging."""
    words = _parse_keywords(keywords)
    q = QuerySpec.range(x, y, words, radius) if kind == "range" else QuerySpec.knn(x, y, words, k)
    res = oracle(load_dataset(dataset), q)
    rows = _object_rows(q, res.objects)
    _emit({"kind": kind, "count": len(rows), "results": rows}, rows, _ROW_FIELDS, fmt)


def run():
    try:
        main(standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except RiskError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    run()
