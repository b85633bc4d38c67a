"""Keyed block-to-state transition tables and the encode/decode step.

The transition function t maps an n-bit block value to an N-bit word built
by concatenating N/n independent random bijections of [0, 2^n), the first
one in the lowest n bits. One step with state s:

    y  = low n bits of (t(x) XOR s)
    s' = rotl(s XOR t(x), rotation)        (N-bit rotation)

Because the low n bits of t are a bijection, y and s determine x.

Table generation is bit-exact and platform independent. A splitmix64
generator seeded with the key (state += 0x9E3779B97F4A7C15; then
z = (z ^ z>>30) * 0xBF58476D1CE4E5B9; z = (z ^ z>>27) * 0x94D049BB133111EB;
z ^= z>>31, all mod 2^64) drives, for each table j = 0..N/n-1 in order, a
Fisher-Yates shuffle of the identity on [0, 2^n): for i = 2^n-1 down to 1,
swap entries i and (next() mod (i+1)). The next output after the last
table, masked to N bits, is the initial state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bitcore import BlockLayout
from .errors import BadParams

MASK64 = (1 << 64) - 1
DEFAULT_STATE_BITS = 64
DEFAULT_ROTATION = 13


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)


def valid_rotation(rotation: int, n: int, state_bits: int) -> bool:
    return n <= rotation < state_bits and state_bits % rotation != 0


def default_rotation(n: int, state_bits: int = DEFAULT_STATE_BITS) -> int:
    """13 when allowed, otherwise the smallest valid amount >= n."""
    if valid_rotation(DEFAULT_ROTATION, n, state_bits):
        return DEFAULT_ROTATION
    for r in range(n, state_bits):
        if valid_rotation(r, n, state_bits):
            return r
    raise BadParams(f"no valid rotation for n={n}, N={state_bits}")


@dataclass(frozen=True, eq=False)
class Codec:
    layout: BlockLayout
    state_bits: int
    rotation: int
    key: int
    tables: tuple[np.ndarray, ...] = field(repr=False)
    initial_state: int = 0
    # t(x) for every x, as python ints and as a uint64 array
    t: tuple[int, ...] = field(repr=False, default=())
    t_array: np.ndarray = field(repr=False, default=None)
    inv_first: tuple[int, ...] = field(repr=False, default=())

    @property
    def n(self) -> int:
        return self.layout.n

    @property
    def block_mask(self) -> int:
        return (1 << self.layout.n) - 1

    @property
    def state_mask(self) -> int:
        return (1 << self.state_bits) - 1

    def rotl(self, v: int) -> int:
        r, N = self.rotation, self.state_bits
        return ((v << r) | (v >> (N - r))) & self.state_mask

    def rotl_array(self, v: np.ndarray) -> np.ndarray:
        r, N = np.uint64(self.rotation), np.uint64(self.state_bits)
        out = (v << r) | (v >> (N - r))
        if self.state_bits < 64:
            out &= np.uint64(self.state_mask)
        return out


def build_codec(
    key: int,
    layout: BlockLayout,
    state_bits: int = DEFAULT_STATE_BITS,
    rotation: int | None = None,
) -> Codec:
    n = layout.n
    if not (n <= state_bits <= 64) or state_bits % n:
        raise BadParams(f"block size {n} must divide state size {state_bits} (<= 64)")
    if rotation is None:
        rotation = default_rotation(n, state_bits)
    if not valid_rotation(rotation, n, state_bits):
        raise BadParams(
            f"rotation {rotation} must be in [{n}, {state_bits}) and not divide {state_bits}"
        )
    rng = SplitMix64(key)
    size = 1 << n
    tables = []
    for _ in range(state_bits // n):
        perm = list(range(size))
        for i in range(size - 1, 0, -1):
            j = rng.next() % (i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        arr = np.array(perm, dtype=np.int64)
        arr.setflags(write=False)
        tables.append(arr)
    initial_state = rng.next() & ((1 << state_bits) - 1)

    t = [0] * size
    for j, tab in enumerate(tables):
        shift = j * n
        for x, v in enumerate(tab.tolist()):
            t[x] |= v << shift
    inv_first = [0] * size
    for x, v in enumerate(tables[0].tolist()):
        inv_first[v] = x
    t_array = np.array(t, dtype=np.uint64)
    t_array.setflags(write=False)
    return Codec(
        layout=layout,
        state_bits=state_bits,
        rotation=rotation,
        key=key & MASK64,
        tables=tuple(tables),
        initial_state=initial_state,
        t=tuple(t),
        t_array=t_array,
        inv_first=tuple(inv_first),
    )


def encode_step(codec: Codec, x: int, s: int) -> tuple[int, int]:
    v = s ^ codec.t[x]
    return v & codec.block_mask, codec.rotl(v)


def decode_step(codec: Codec, y: int, s: int) -> tuple[int, int, bool]:
    """Invert one step. The flag is False when x has a nonzero redundancy field."""
    x = codec.inv_first[(y ^ s) & codec.block_mask]
    v = s ^ codec.t[x]
    return x, codec.rotl(v), (x & codec.layout.redundancy_mask) == 0


def encode_blocks(codec: Codec, xs, state: int | None = None) -> tuple[list[int], int]:
    """Run encode_step over a block sequence; returns (ys, final_state)."""
    s = codec.initial_state if state is None else state
    ys = []
    t, bm, rotl = codec.t, codec.block_mask, codec.rotl
    for x in xs:
        v = s ^ t[int(x)]
        ys.append(v & bm)
        s = rotl(v)
    return ys, s


def decode_blocks(codec: Codec, ys, state: int | None = None):
    """Chain decode_step; returns (xs, final_state, indices of blocks failing redundancy)."""
    s = codec.initial_state if state is None else state
    xs, failed = [], []
    for i, y in enumerate(ys):
        x, s, ok = decode_step(codec, int(y), s)
        xs.append(x)
        if not ok:
            failed.append(i)
    return xs, s, failed


def blocks_to_bits(ys, n: int) -> np.ndarray:
    """Block values to a bit stream; bit i of block b is stream position b*n + i."""
    ys = np.asarray(ys, dtype=np.int64).reshape(-1, 1)
    return ((ys >> np.arange(n, dtype=np.int64)) & 1).astype(np.uint8).reshape(-1)


def bits_to_blocks(bits, n: int) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64).reshape(-1, n)
    return (bits << np.arange(n, dtype=np.int64)).sum(axis=1)
