"""The honest-but-curious cloud: token lookup, blind updates, and a TCP service.

This module holds no key material and imports nothing that can decrypt.
"""
from __future__ import annotations

import json
import logging
import socket
import socketserver
import threading
import time
from dataclasses import dataclass, field

from .errors import ProtocolError
from .protocol import (MAX_FRAME, Msg, decode_records, decode_trapdoor, encode_query_response,
                       frame, read_frame, unframe)
from .records import SkQTree, load_index

log = logging.getLogger(__name__)


class RWLock:
    """Many readers or one writer; a waiting writer blocks new readers."""

    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writer = False
        self._waiting = 0

    def acquire_read(self):
        with self._cond:
            while self._writer or self._waiting:
                self._cond.wait()
            self._readers += 1

    def release_read(self):
        with self._cond:
            self._readers -= 1
            if not self._readers:
                self._cond.notify_all()

    def acquire_write(self):
        with self._cond:
            self._waiting += 1
            while self._writer or self._readers:
                self._cond.wait()
            self._waiting -= 1
            self._writer = True

    def release_write(self):
        with self._cond:
            self._writer = False
            self._cond.notify_all()


@dataclass(frozen=True)
class QueryRecord:
    query_id: bytes
    phase: int
    theta: int
    tokens: frozenset
    touched: tuple
    ts_ns: int


@dataclass
class QueryLog:
    records: list = field(default_factory=list)

    def add(self, rec: QueryRecord):
        self.records.append(rec)


class CloudIndex:
    """Token -> ciphertext store answering trapdoors."""

    def __init__(self, tree: SkQTree, token_len: int, keep_log: bool = True):
        self.map = dict(tree.entries)
        self.len = tree.len
        self.token_len = token_len
        self.lock = RWLock()
        self.log = QueryLog() if keep_log else None
        self._stat_lock = threading.Lock()
        self.stats = {"queries": 0, "lookups": 0, "hits": 0, "misses": 0, "updates": 0}

    @classmethod
    def from_file(cls, path, keep_log: bool = True) -> "CloudIndex":
        tree, sp = load_index(path)
        return cls(tree, sp.lam // 8, keep_log)

    def c_query(self, trapdoor):
        """Matching ``(token, ciphertext)`` pairs, in trapdoor order, once each."""
        out = []
        seen = set()
        self.lock.acquire_read()
        try:
            m = self.map
            for t in trapdoor.tokens:
                if t in seen:
                    continue
                seen.add(t)
                ct = m.get(t)
                if ct is not None:
                    out.append((t, ct))
        finally:
            self.lock.release_read()
        with self._stat_lock:
            self.stats["queries"] += 1
            self.stats["lookups"] += len(seen)
            self.stats["hits"] += len(out)
            self.stats["misses"] += len(seen) - len(out)
            if self.log is not None:
                self.log.add(QueryRecord(trapdoor.query_id, int(trapdoor.phase), trapdoor.theta,
                                         frozenset(seen), tuple(t for t, _ in out),
                                         time.monotonic_ns()))
        return out

    def apply_update(self, records, allow_create: bool) -> int:
        """Replace ciphertexts blindly; only inserts may add new tokens."""
        body_len = {len(ct.body) for ct in self.map.values()}
        for token, ct in records:
            if len(token) != self.token_len:
                raise ProtocolError("update token has the wrong length")
            if body_len and len(ct.body) not in body_len:
                raise ProtocolError("update ciphertext length differs from the index")
        self.lock.acquire_write()
        try:
            if not allow_create:
                missing = [t for t, _ in records if t not in self.map]
                if missing:
                    raise ProtocolError(f"{len(missing)} unknown token(s) in delete update")
            for token, ct in records:
                self.map[token] = ct
        finally:
            self.lock.release_write()
        with self._stat_lock:
            self.stats["updates"] += 1
        return len(records)

    def snapshot(self) -> SkQTree:
        self.lock.acquire_read()
        try:
            return SkQTree(dict(self.map), self.len)
        finally:
            self.lock.release_read()

    def handle(self, msg_type: int, payload: bytes):
        """Dispatch one request; returns ``(response_type, payload)``."""
        try:
            if msg_type == Msg.QUERY:
                td = decode_trapdoor(payload, self.token_len)
                return Msg.QUERY_OK, encode_query_response(td.query_id, self.c_query(td))
            if msg_type in (Msg.INSERT, Msg.DELETE):
                records = decode_records(payload, self.token_len)
                n = self.apply_update(records, allow_create=msg_type == Msg.INSERT)
                return Msg(msg_type | 0x80), n.to_bytes(4, "big")
            if msg_type == Msg.STATS:
                with self._stat_lock:
                    body = dict(self.stats, entries=len(self.map))
                return Msg.STATS_OK, json.dumps(body, sort_keys=True).encode()
            raise ProtocolError(f"unknown message type {msg_type}")
        except ProtocolError as exc:
            return Msg.ERROR, str(exc).encode("utf-8")

    def handle_frame(self, data: bytes, max_frame: int = MAX_FRAME) -> bytes:
        try:
            msg_type, payload = unframe(data, max_frame)
        except ProtocolError as exc:
            return frame(Msg.ERROR, str(exc).encode("utf-8"))
        return frame(*self.handle(msg_type, payload))

    def leakage_report(self) -> dict:
        """Search pattern (which queries share a token set) and access history."""
        by_query = {}
        order = []
        history = []
        for rec in (self.log.records if self.log else []):
            if rec.query_id not in by_query:
                by_query[rec.query_id] = set()
                order.append(rec.query_id)
            by_query[rec.query_id] |= rec.tokens
            history.append({"query_id": rec.query_id.hex(), "phase": rec.phase,
                            "theta": rec.theta, "ts_ns": rec.ts_ns,
                            "touched": [t.hex() for t in rec.touched]})
        sets = [frozenset(by_query[q]) for q in order]
        matrix = [[a == b for b in sets] for a in sets]
        return {"query_ids": [q.hex() for q in order], "search_pattern": matrix,
                "history": history}


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        cloud = self.server.cloud
        sock = self.request
        while True:
            try:
                got = read_frame(sock, self.server.max_frame)
            except ProtocolError as exc:
                log.warning("rejecting frame from %s: %s", self.client_address, exc)
                try:
                    sock.sendall(frame(Msg.ERROR, str(exc).encode("utf-8")))
                except OSError:
                    pass
                return
            except (ConnectionError, OSError) as exc:
                log.info("connection %s dropped: %s", self.client_address, exc)
                return
            if got is None:
                return
            try:
                sock.sendall(frame(*cloud.handle(*got)))
            except OSError as exc:
                log.info("send to %s failed: %s", self.client_address, exc)
                return
            except Exception:  # never let one request kill the service
                log.exception("request from %s failed", self.client_address)
                return


class CloudServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, addr, cloud: CloudIndex, max_frame: int = MAX_FRAME):
        self.cloud = cloud
        self.max_frame = max_frame
        super().__init__(addr, _Handler)


def parse_addr(addr: str):
    host, _, port = addr.rpartition(":")
    return (host or "127.0.0.1", int(port))


def serve(listen_addr, index_path, max_frame: int = MAX_FRAME, ready=None):
    """Serve ``index_path`` on ``listen_addr`` ("host:port") until interrupted."""
    cloud = CloudIndex.from_file(index_path)
    if isinstance(listen_addr, str):
        listen_addr = parse_addr(listen_addr)
    with CloudServer(listen_addr, cloud, max_frame) as server:
        log.info("serving %d entries on %s:%d", len(cloud.map), *server.server_address)
        if ready is not None:
            ready(server)
        server.serve_forever()


def start_background(cloud: CloudIndex, host="127.0.0.1", port=0, max_frame: int = MAX_FRAME):
    """Start a server thread; returns the server (call ``shutdown()`` to stop)."""
    server = CloudServer((host, port), cloud, max_frame)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    return server


__all__ = ["CloudIndex", "CloudServer", "QueryLog", "QueryRecord", "serve", "start_background",
           "parse_addr", "socket"]
