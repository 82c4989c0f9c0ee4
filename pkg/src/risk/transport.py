"""Client-to-cloud transports: in-process loopback and TCP."""
from __future__ import annotations

import json
import socket
import threading

from .errors import ProtocolError
from .protocol import (MAX_FRAME, Msg, decode_query_response, encode_records, frame,
                       read_frame, unframe)


class Transport:
    """Sends framed requests; subclasses implement :meth:`roundtrip`."""

    def __init__(self, token_len: int, capture: bool = False):
        self.token_len = token_len
        self.bytes_sent = 0
        self.bytes_received = 0
        self.capture = [] if capture else None

    def roundtrip(self, data: bytes) -> bytes:
        raise NotImplementedError

    def request(self, msg_type: int, payload: bytes):
        out = frame(msg_type, payload)
        back = self.roundtrip(out)
        self.bytes_sent += len(out)
        self.bytes_received += len(back)
        if self.capture is not None:
            self.capture.append((out, back))
        rtype, body = unframe(back)
        if rtype == Msg.ERROR:
            raise ProtocolError(body.decode("utf-8", "replace"))
        if rtype != (msg_type | 0x80):
            raise ProtocolError(f"unexpected response type {rtype:#x} to {msg_type}")
        return body

    def query(self, trapdoor):
        """Send one trapdoor; returns the matched ``(token, ciphertext)`` records."""
        qid, records = decode_query_response(self.request(Msg.QUERY, trapdoor.encode()),
                                             self.token_len)
        if qid != trapdoor.query_id:
            raise ProtocolError("query id mismatch in response")
        return records

    def update(self, records, create: bool) -> int:
        body = self.request(Msg.INSERT if create else Msg.DELETE, encode_records(records))
        return int.from_bytes(body, "big")

    def stats(self) -> dict:
        return json.loads(self.request(Msg.STATS, b""))

    def close(self):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class LoopbackTransport(Transport):
    """Routes frames straight into an in-process :class:`~risk.cloud.CloudIndex`.

    Every byte still goes through the wire encoding, so ``capture=True``
    records exactly what a network observer would see.
    """

    def __init__(self, cloud, capture: bool = False):
        super().__init__(cloud.token_len, capture)
        self.cloud = cloud

    def roundtrip(self, data: bytes) -> bytes:
        return self.cloud.handle_frame(data)


class TcpTransport(Transport):
    """One persistent connection to a ``risk serve`` process."""

    def __init__(self, addr, token_len: int, timeout: float = 60.0, capture: bool = False,
                 max_frame: int = MAX_FRAME):
        super().__init__(token_len, capture)
        if isinstance(addr, str):
            host, _, port = addr.rpartition(":")
            addr = (host or "127.0.0.1", int(port))
        self.sock = socket.create_connection(addr, timeout=timeout)
        self.max_frame = max_frame
        self._lock = threading.Lock()

    def roundtrip(self, data: bytes) -> bytes:
        with self._lock:
            self.sock.sendall(data)
            got = read_frame(self.sock, self.max_frame)
        if got is None:
            raise ConnectionError("server closed the connection")
        return frame(*got)

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass
