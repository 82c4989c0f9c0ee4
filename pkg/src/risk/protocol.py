"""Length-prefixed binary frames exchanged between client/owner and cloud.

Frame:   "RSKQ" | version u8 | msg_type u8 | payload_len u32 | payload
Trapdoor: query_id (16 bytes) | phase u8 | theta u16 | count u32 | count tokens
Record:  token | nonce_len u16 | nonce | body_len u32 | body | tag (16 bytes)

Multi-byte integers are big-endian.  Responses use ``0x80 | msg_type``;
``0xFF`` carries a UTF-8 error message.
"""
from __future__ import annotations

import enum
import struct
from typing import NamedTuple

from .errors import ProtocolError
from .records import TAG_LEN, Ciphertext

MAGIC = b"RSKQ"
VERSION = 1
HEADER = struct.Struct(">4sBBI")
MAX_FRAME = 64 << 20

_THEAD = struct.Struct(">16sBHI")
MAX_PHASE = 3
_U16 = struct.Struct(">H")
_U32 = struct.Struct(">I")


class Msg(enum.IntEnum):
    QUERY = 1
    INSERT = 2
    DELETE = 3
    STATS = 4
    QUERY_OK = 0x81
    INSERT_OK = 0x82
    DELETE_OK = 0x83
    STATS_OK = 0x84
    ERROR = 0xFF


def frame(msg_type: int, payload: bytes) -> bytes:
    return HEADER.pack(MAGIC, VERSION, int(msg_type), len(payload)) + payload


def parse_header(head: bytes, max_frame: int = MAX_FRAME):
    if len(head) != HEADER.size:
        raise ProtocolError("truncated frame header")
    magic, version, msg_type, n = HEADER.unpack(head)
    if magic != MAGIC:
        raise ProtocolError("bad frame magic")
    if version != VERSION:
        raise ProtocolError(f"unsupported protocol version {version}")
    if n > max_frame:
        raise ProtocolError(f"frame of {n} bytes exceeds limit {max_frame}")
    return msg_type, n


def unframe(data: bytes, max_frame: int = MAX_FRAME):
    msg_type, n = parse_header(data[:HEADER.size], max_frame)
    payload = data[HEADER.size:]
    if len(payload) != n:
        raise ProtocolError("frame payload length mismatch")
    return msg_type, payload


def read_exact(sock, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(min(n - len(buf), 1 << 20))
        if not chunk:
            raise ConnectionError("connection closed mid-frame")
        buf += chunk
    return bytes(buf)


def read_frame(sock, max_frame: int = MAX_FRAME):
    head = sock.recv(HEADER.size, )
    if not head:
        return None
    if len(head) < HEADER.size:
        head += read_exact(sock, HEADER.size - len(head))
    msg_type, n = parse_header(head, max_frame)
    return msg_type, read_exact(sock, n)


class WireTrapdoor(NamedTuple):
    tokens: list
    phase: int
    theta: int
    query_id: bytes


def encode_trapdoor(query_id: bytes, phase: int, theta: int, tokens) -> bytes:
    return b"".join([_THEAD.pack(query_id, int(phase), theta, len(tokens)), *tokens])


def decode_trapdoor(payload: bytes, token_len: int) -> WireTrapdoor:
    if len(payload) < _THEAD.size:
        raise ProtocolError("trapdoor payload shorter than its header")
    qid, phase, theta, count = _THEAD.unpack_from(payload, 0)
    if len(payload) != _THEAD.size + count * token_len:
        raise ProtocolError("trapdoor token section has the wrong length")
    if phase > MAX_PHASE:
        raise ProtocolError(f"unknown phase {phase}")
    off = _THEAD.size
    tokens = [payload[off + i * token_len: off + (i + 1) * token_len] for i in range(count)]
    return WireTrapdoor(tokens, phase, theta, qid)


def encode_records(records) -> bytes:
    parts = [_U32.pack(len(records))]
    for token, ct in records:
        parts += [token, _U16.pack(len(ct.nonce)), ct.nonce, _U32.pack(len(ct.body)), ct.body,
                  ct.tag]
    return b"".join(parts)


def decode_records(data: bytes, token_len: int, off: int = 0):
    try:
        (count,) = _U32.unpack_from(data, off)
        off += 4
        out = []
        for _ in range(count):
            token = data[off:off + token_len]
            off += token_len
            (nl,) = _U16.unpack_from(data, off)
            off += 2
            nonce = data[off:off + nl]
            off += nl
            (bl,) = _U32.unpack_from(data, off)
            off += 4
            body = data[off:off + bl]
            off += bl
            tag = data[off:off + TAG_LEN]
            off += TAG_LEN
            if len(token) != token_len or len(nonce) != nl or len(body) != bl or len(tag) != TAG_LEN:
                raise ProtocolError("truncated record")
            out.append((token, Ciphertext(nonce, body, tag)))
    except struct.error:
        raise ProtocolError("truncated record section") from None
    if off != len(data):
        raise ProtocolError("trailing bytes after records")
    return out


def encode_query_response(query_id: bytes, records) -> bytes:
    return query_id + encode_records(records)


def decode_query_response(payload: bytes, token_len: int):
    if len(payload) < 16:
        raise ProtocolError("query response too short")
    return payload[:16], decode_records(payload, token_len, 16)
