"""Payload framing: 32-bit big-endian byte length, payload, zero padding.

Bytes become bits most-significant first. Block b carries framed bits
[b*k, (b+1)*k) in its payload field, the first of them in bit 0 of x.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import FrameError

HEADER_BITS = 32


def capacity_bytes(num_blocks: int, k: int) -> int:
    return max(0, (num_blocks * k - HEADER_BITS) // 8)


def frame(payload: bytes, num_blocks: int, k: int) -> np.ndarray:
    """Framed payload as a bit array of exactly num_blocks * k bits."""
    total = num_blocks * k
    raw = struct.pack(">I", len(payload)) + bytes(payload)
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
    if bits.size > total:
        raise FrameError(
            f"payload of {len(payload)} bytes needs {bits.size} bits, capacity is {total}"
        )
    out = np.zeros(total, dtype=np.uint8)
    out[: bits.size] = bits
    return out


def unframe(bits) -> bytes:
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    if bits.size < HEADER_BITS:
        raise FrameError(f"only {bits.size} bits, no room for a length prefix")
    (length,) = struct.unpack(">I", np.packbits(bits[:HEADER_BITS]).tobytes())
    if HEADER_BITS + 8 * length > bits.size:
        raise FrameError(f"length prefix {length} exceeds capacity of {bits.size} bits")
    body = bits[HEADER_BITS : HEADER_BITS + 8 * length]
    return np.packbits(body).tobytes()


def bits_to_fields(bits, k: int) -> list[int]:
    """Group a bit stream into k-bit field values, first bit least significant."""
    if k == 0:
        return []
    bits = np.asarray(bits, dtype=np.int64).reshape(-1, k)
    return (bits << np.arange(k, dtype=np.int64)).sum(axis=1).tolist()


def fields_to_bits(values, k: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64).reshape(-1, 1)
    if k == 0:
        return np.zeros(0, dtype=np.uint8)
    return ((values >> np.arange(k, dtype=np.int64)) & 1).astype(np.uint8).reshape(-1)
