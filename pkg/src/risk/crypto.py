"""Keyed PRF tokens and authenticated, length-hiding value encryption.

Tokens are HMAC-SHA256 truncated to lambda bits.  Values are padded to a fixed
length (4-byte big-endian length prefix, plaintext, zeros) and sealed with
AES-GCM under a fresh random 96-bit nonce.
"""
from __future__ import annotations

import hashlib
import hmac
import os
import struct
from dataclasses import dataclass

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .errors import AuthenticationFailure, PaddingError, ValueTooLong, WeakParameter
from .records import LEN_PREFIX, NONCE_LEN, TAG_LEN, Ciphertext

KEY_MAGIC = b"RKEY"
SUPPORTED_LAMBDA = (128, 192, 256)
_LEN = struct.Struct(">I")


@dataclass(frozen=True)
class SecretKeys:
    lam: int
    sk_H: bytes
    sk_E: bytes

    def __post_init__(self):
        if self.lam < 128:
            raise WeakParameter(f"lambda={self.lam} below 128 bits")
        if len(self.sk_H) != self.lam // 8 or len(self.sk_E) != self.lam // 8:
            raise ValueError("key length does not match lambda")

    def __repr__(self):
        return f"SecretKeys(lam={self.lam}, ...)"


def setup(lambda_bits: int = 128, seed=None) -> SecretKeys:
    """Sample fresh keys; ``seed`` makes them reproducible (tests only)."""
    if lambda_bits < 128:
        raise WeakParameter(f"lambda={lambda_bits} below the 128-bit minimum")
    if lambda_bits not in SUPPORTED_LAMBDA:
        raise ValueError(f"lambda must be one of {SUPPORTED_LAMBDA}")
    n = lambda_bits // 8
    if seed is None:
        return SecretKeys(lambda_bits, os.urandom(n), os.urandom(n))
    if isinstance(seed, int):
        seed = seed.to_bytes((seed.bit_length() + 8) // 8, "big", signed=True)
    elif isinstance(seed, str):
        seed = seed.encode()
    stream = hashlib.shake_256(b"risk-setup\x00" + seed).digest(2 * n)
    return SecretKeys(lambda_bits, stream[:n], stream[n:])


def save_keys(path, keys: SecretKeys) -> None:
    with open(path, "wb") as fh:
        fh.write(KEY_MAGIC + struct.pack(">H", keys.lam) + keys.sk_H + keys.sk_E)
    os.chmod(path, 0o600)


def load_keys(path) -> SecretKeys:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != KEY_MAGIC:
        raise ValueError(f"{path}: not a key file")
    (lam,) = struct.unpack_from(">H", data, 4)
    n = lam // 8
    if len(data) != 6 + 2 * n:
        raise ValueError(f"{path}: truncated key file")
    return SecretKeys(lam, data[6:6 + n], data[6 + n:])


class Tokenizer:
    """PRF keyed with sk_H; reuses the keyed HMAC state across calls."""

    def __init__(self, keys: SecretKeys):
        self._base = hmac.new(keys.sk_H, digestmod="sha256")
        self._n = keys.lam // 8
        if self._n > self._base.digest_size:
            raise ValueError("lambda exceeds the PRF output size")

    def __call__(self, key_bytes: bytes) -> bytes:
        h = self._base.copy()
        h.update(key_bytes)
        return h.digest()[: self._n]


def prf_token(sk_H, key_bytes: bytes) -> bytes:
    if isinstance(sk_H, SecretKeys):
        return Tokenizer(sk_H)(key_bytes)
    return hmac.new(sk_H, key_bytes, "sha256").digest()[: len(sk_H)]


def pad(plaintext: bytes, length: int) -> bytes:
    if len(plaintext) > length:
        raise ValueTooLong(f"value of {len(plaintext)} bytes exceeds len={length}")
    return _LEN.pack(len(plaintext)) + plaintext + bytes(length - len(plaintext))


def unpad(padded: bytes) -> bytes:
    if len(padded) < LEN_PREFIX:
        raise PaddingError("padded value shorter than its length prefix")
    (n,) = _LEN.unpack_from(padded, 0)
    if n > len(padded) - LEN_PREFIX:
        raise PaddingError(f"length prefix {n} exceeds padded size")
    if any(padded[LEN_PREFIX + n:]):
        raise PaddingError("non-zero padding")
    return padded[LEN_PREFIX:LEN_PREFIX + n]


def _aead(key):
    if isinstance(key, SecretKeys):
        key = key.sk_E
    return AESGCM(key)


def encrypt_value(sk_E, plaintext: bytes, length: int, aead=None) -> Ciphertext:
    aead = aead or _aead(sk_E)
    nonce = os.urandom(NONCE_LEN)
    sealed = aead.encrypt(nonce, pad(plaintext, length), None)
    return Ciphertext(nonce, sealed[:-TAG_LEN], sealed[-TAG_LEN:])


def decrypt_value(sk_E, c: Ciphertext, aead=None) -> bytes:
    aead = aead or _aead(sk_E)
    try:
        padded = aead.decrypt(c.nonce, c.body + c.tag, None)
    except InvalidTag:
        raise AuthenticationFailure("ciphertext failed authentication") from None
    return unpad(padded)
