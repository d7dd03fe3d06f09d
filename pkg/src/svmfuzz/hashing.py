"""Keccak-256 (the pre-standard SHA-3 padding used by Ethereum)."""

from Crypto.Hash import keccak


def keccak256(data: bytes) -> bytes:
    h = keccak.new(digest_bits=256)
    h.update(data)
    return h.digest()
