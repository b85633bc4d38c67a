"""Encoder-side tree search.

The encoder picks freedom bits block by block so that the emitted bits look
like samples from the grayness map. Two strategies:

* evolving ensemble (``encode_constrained``): keep the M lightest partial
  paths, extend each by every freedom value, keep the M lightest children;
* depth-first backtracking (``encode_kt``) for maps with only fixed and free
  pixels, where a child either satisfies the constraints or it does not.

Path weight is the sum over emitted bits of -lg(1 - eps) when the bit has the
expected color (black for g >= 1/2) and -lg(eps) otherwise, eps = 1/2 - |1/2 - g|.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import difficulty_profile
from .bitcore import BitMatrix, GraynessMap, Ordering, permute
from .codec import Codec, blocks_to_bits, encode_blocks
from .errors import (
    DimensionMismatch,
    DomainError,
    EnsembleDied,
    Infeasible,
    LengthMismatch,
    StepLimitExceeded,
)
from .framing import bits_to_fields, fields_to_bits, frame

log = logging.getLogger(__name__)

_BYTE_BITS = ((np.arange(256)[:, None] >> np.arange(8)) & 1).astype(np.float64)


@dataclass(frozen=True)
class SearchParams:
    base_ensemble: int = 30
    max_ensemble: int = 4096
    adaptive: bool = False
    max_restarts: int = 4
    step_limit: int = 1_000_000

    def __post_init__(self):
        if not (1 <= self.base_ensemble <= self.max_ensemble):
            raise DomainError("need 1 <= base_ensemble <= max_ensemble")
        if self.max_restarts < 0 or self.step_limit < 1:
            raise DomainError("max_restarts must be >= 0 and step_limit >= 1")


@dataclass
class SearchReport:
    mode: str
    blocks: int
    final_weight: float = 0.0
    restarts: int = 0
    base_ensemble: int = 0
    ensemble_sizes: list = field(default_factory=list)
    population: list = field(default_factory=list)
    freedom: list = field(default_factory=list)
    visited_nodes: int = 0
    visits_per_depth: np.ndarray | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["block_index", "ensemble_size", "population", "visits", "freedom"])
        for i in range(self.blocks):
            w.writerow([
                i + 1,
                self.ensemble_sizes[i] if i < len(self.ensemble_sizes) else "",
                self.population[i] if i < len(self.population) else "",
                int(self.visits_per_depth[i]) if self.visits_per_depth is not None else "",
                self.freedom[i] if i < len(self.freedom) else "",
            ])
        return buf.getvalue()


def bit_costs(g) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-pixel (expected bit, cost if expected, cost if not). Mismatch cost is inf on fixed pixels."""
    g = np.asarray(g, dtype=np.float64)
    expected = (g >= 0.5).astype(np.int64)
    eps = 0.5 - np.abs(0.5 - g)
    # math.log2 per distinct value keeps costs identical across numpy builds
    uniq, inv = np.unique(eps, return_inverse=True)
    match = np.array([-math.log2(1.0 - e) for e in uniq.tolist()])
    miss = np.array([-math.log2(e) if e > 0 else math.inf for e in uniq.tolist()])
    return expected, match[inv.reshape(-1)], miss[inv.reshape(-1)]


def matrix_weight(matrix: BitMatrix, gmap: GraynessMap) -> float:
    """Total path weight of a finished code against a map (inf if a fixed pixel is violated)."""
    if (matrix.width, matrix.height) != (gmap.width, gmap.height):
        raise DimensionMismatch("matrix and map sizes differ")
    expected, match, miss = bit_costs(gmap.g)
    hit = matrix.bits.astype(np.int64) == expected
    return math.fsum(np.where(hit, match, miss).tolist())


class _BlockCosts:
    """Vectorized cost lookup for whole n-bit blocks.

    cost(y) = base + sum over set bits of (y XOR expected) of (miss - match),
    evaluated with one 256-entry table per byte of the block.
    """

    def __init__(self, stream_g: np.ndarray, n: int):
        nb = stream_g.size // n
        expected, match, miss = bit_costs(stream_g)
        expected = expected.reshape(nb, n)
        match = match.reshape(nb, n)
        miss = miss.reshape(nb, n)
        fixed = np.isinf(miss)
        weights = 1 << np.arange(n, dtype=np.int64)
        self.expected = (expected * weights).sum(axis=1)
        self.fixed = (fixed.astype(np.int64) * weights).sum(axis=1)
        delta = np.where(fixed, 0.0, miss - match)
        base = np.zeros(nb)
        for j in range(n):
            base = base + match[:, j]
        self.base = base
        self.chunks = (n + 7) // 8
        pad = np.zeros((nb, self.chunks * 8))
        pad[:, :n] = delta
        pad = pad.reshape(nb, self.chunks, 8)
        tables = np.zeros((nb, self.chunks, 256))
        for j in range(8):
            tables = tables + _BYTE_BITS[None, None, :, j] * pad[:, :, j, None]
        self.tables = tables

    def __call__(self, b: int, y: np.ndarray):
        u = y ^ self.expected[b]
        ok = (u & self.fixed[b]) == 0
        cost = self.base[b] + self.tables[b, 0][u & 255]
        if self.chunks > 1:
            cost = cost + self.tables[b, 1][(u >> 8) & 255]
        return cost, ok


def _check_geometry(codec: Codec, gmap: GraynessMap, ordering: Ordering):
    if (gmap.width, gmap.height) != (ordering.width, ordering.height):
        raise DimensionMismatch("map and ordering sizes differ")
    if gmap.g.size % codec.layout.n:
        raise DimensionMismatch(
            f"{gmap.g.size} pixels not divisible by block size {codec.layout.n}"
        )


def _ensemble_schedule(gmap, layout, ordering, params, base):
    nb = gmap.g.size // layout.n
    if not params.adaptive:
        return np.full(nb, base, dtype=np.int64), None
    rows, _ = difficulty_profile(gmap, layout, ordering)
    deficit = np.array([max(0.0, -r.log2_population) for r in rows])
    cap = max(params.max_ensemble, base)
    sizes = np.minimum(cap, np.ceil(base * np.exp2(np.minimum(deficit, 62.0))))
    return sizes.astype(np.int64), rows


def _run_ensemble(codec, xbase, costs, sizes):
    """One pass of the evolving ensemble. Returns (freedom values, weight, populations) or None if it died."""
    layout = codec.layout
    nf = 1 << layout.f
    fshift = np.arange(nf, dtype=np.int64) << layout.k
    bm = np.uint64(codec.block_mask)
    t = codec.t_array
    states = np.array([codec.initial_state], dtype=np.uint64)
    weights = np.zeros(1)
    parents, choices, populations = [], [], []
    for b in range(len(xbase)):
        tx = t[xbase[b] | fshift]
        v = (states[:, None] ^ tx[None, :]).reshape(-1)
        y = (v & bm).astype(np.int64)
        cost, ok = costs(b, y)
        w = (weights[:, None] + cost.reshape(-1, nf)).reshape(-1)
        cand = np.flatnonzero(ok)
        populations.append(int(cand.size))
        if cand.size == 0:
            return None, b, populations
        # stable sort: ties resolved by creation order (parent rank, freedom value)
        keep = cand[np.argsort(w[cand], kind="stable")[: sizes[b]]]
        parents.append(keep // nf)
        choices.append(keep % nf)
        states = codec.rotl_array(v[keep])
        weights = w[keep]
    freedom = [0] * len(xbase)
    idx = 0
    for b in range(len(xbase) - 1, -1, -1):
        freedom[b] = int(choices[b][idx])
        idx = parents[b][idx]
    return freedom, float(weights[0]), populations


def _emit(codec, xbase, freedom, ordering) -> BitMatrix:
    k = codec.layout.k
    xs = [int(xb) | (fv << k) for xb, fv in zip(xbase, freedom)]
    ys, _ = encode_blocks(codec, xs)
    stream = blocks_to_bits(ys, codec.layout.n)
    return BitMatrix(ordering.width, ordering.height, permute(stream, ordering, "forward"))


def _payload_fields(codec, payload, num_blocks):
    k = codec.layout.k
    if k == 0:
        if payload:
            raise DomainError("layout has no payload bits")
        return np.zeros(num_blocks, dtype=np.int64)
    return np.array(bits_to_fields(frame(payload, num_blocks, k), k), dtype=np.int64)


def search_freedom(codec, xbase, gmap, ordering, params, mode="ensemble"):
    """Evolving-ensemble search over fixed per-block payload fields ``xbase``.

    Restarts with a doubled base ensemble when every path is pruned.
    """
    layout = codec.layout
    stream_g = permute(gmap.g, ordering, "inverse")
    costs = _BlockCosts(stream_g, layout.n)
    base = params.base_ensemble
    report = SearchReport(mode=mode, blocks=len(xbase))
    for attempt in range(params.max_restarts + 1):
        sizes, _ = _ensemble_schedule(gmap, layout, ordering, params, base)
        freedom, result, populations = _run_ensemble(codec, xbase, costs, sizes)
        if freedom is not None:
            report.final_weight = result
            report.restarts = attempt
            report.base_ensemble = base
            report.ensemble_sizes = sizes.tolist()
            report.population = populations
            report.freedom = freedom
            return freedom, report
        log.info("ensemble died at block %d with base size %d; restarting", result, base)
        base *= 2
    rows, _ = difficulty_profile(gmap, layout, ordering)
    report.restarts = params.max_restarts
    report.base_ensemble = base // 2
    raise EnsembleDied(
        f"ensemble died at block {result} after {params.max_restarts} restarts",
        stats=report, profile=rows,
    )


def encode_constrained(
    codec: Codec,
    payload: bytes,
    gmap: GraynessMap,
    ordering: Ordering,
    params: SearchParams = SearchParams(),
) -> tuple[BitMatrix, SearchReport]:
    """Encode ``payload`` as a code resembling ``gmap`` using the evolving ensemble."""
    _check_geometry(codec, gmap, ordering)
    layout = codec.layout
    if gmap.mean_entropy() < layout.rate:
        raise Infeasible(
            f"mean entropy {gmap.mean_entropy():.4f} is below rate {layout.rate:.4f}"
        )
    nb = gmap.g.size // layout.n
    xbase = _payload_fields(codec, payload, nb)
    freedom, report = search_freedom(codec, xbase, gmap, ordering, params)
    return _emit(codec, xbase, freedom, ordering), report


def encode_kt(
    codec: Codec,
    payload: bytes,
    gmap: GraynessMap,
    ordering: Ordering,
    params: SearchParams = SearchParams(),
) -> tuple[BitMatrix, SearchReport]:
    """Encode against fixed/free pixels with depth-first backtracking.

    Freedom values are tried in ascending order; a child survives when every
    fixed pixel in its block gets its fixed color. ``visited_nodes`` counts
    node expansions, ``visits_per_depth`` splits them by block.
    """
    _check_geometry(codec, gmap, ordering)
    g = gmap.g
    if np.any((g != 0.0) & (g != 0.5) & (g != 1.0)):
        raise DomainError("encode_kt needs a map with only 0, 1/2 and 1")
    layout = codec.layout
    if gmap.mean_entropy() < layout.rate:
        raise Infeasible(f"free fraction {gmap.mean_entropy():.4f} is below rate {layout.rate:.4f}")
    n, k = layout.n, layout.k
    nb = g.size // n
    xbase = _payload_fields(codec, payload, nb).tolist()
    stream_g = permute(g, ordering, "inverse").reshape(nb, n)
    weights = 1 << np.arange(n, dtype=np.int64)
    fixed = ((stream_g != 0.5).astype(np.int64) * weights).sum(axis=1).tolist()
    expected = ((stream_g == 1.0).astype(np.int64) * weights).sum(axis=1).tolist()

    nf = 1 << layout.f
    t, bm, rotl = codec.t, codec.block_mask, codec.rotl
    states = [0] * (nb + 1)
    next_fv = [0] * nb
    chosen = [0] * nb
    per_depth = np.zeros(nb, dtype=np.int64)
    states[0] = codec.initial_state
    visits = 1
    per_depth[0] = 1
    d = 0
    while d < nb:
        s, xb, E, F = states[d], xbase[d], expected[d], fixed[d]
        fv = next_fv[d]
        v = None
        while fv < nf:
            cand = s ^ t[xb | (fv << k)]
            fv += 1
            if ((cand & bm) ^ E) & F == 0:
                v = cand
                break
        next_fv[d] = fv
        if v is None:
            d -= 1
            if d < 0:
                raise Infeasible("search tree exhausted: no code meets the fixed pixels")
            continue
        chosen[d] = fv - 1
        d += 1
        if d == nb:
            break
        states[d] = rotl(v)
        next_fv[d] = 0
        visits += 1
        per_depth[d] += 1
        if visits > params.step_limit:
            report = SearchReport(mode="kt", blocks=nb, visited_nodes=visits,
                                  visits_per_depth=per_depth)
            rows, _ = difficulty_profile(gmap, layout, ordering)
            raise StepLimitExceeded(
                f"step limit {params.step_limit} exceeded at block {d}",
                stats=report, profile=rows,
            )
    matrix = _emit(codec, xbase, chosen, ordering)
    report = SearchReport(
        mode="kt",
        blocks=nb,
        final_weight=nb * n - float(np.count_nonzero(stream_g != 0.5)),
        freedom=chosen,
        visited_nodes=visits,
        visits_per_depth=per_depth,
    )
    return matrix, report


def halftone_compress(
    codec: Codec,
    gmap: GraynessMap,
    ordering: Ordering,
    params: SearchParams = SearchParams(),
) -> tuple[np.ndarray, BitMatrix, SearchReport]:
    """Lossy halftone compression: keep the freedom bits the search found.

    Returns (freedom bit stream of f * blocks bits, reproduced matrix, report).
    """
    layout = codec.layout
    if layout.k != 0:
        raise DomainError("compression needs a layout with k = 0")
    _check_geometry(codec, gmap, ordering)
    nb = gmap.g.size // layout.n
    xbase = np.zeros(nb, dtype=np.int64)
    freedom, report = search_freedom(codec, xbase, gmap, ordering, params, mode="compress")
    bits = fields_to_bits(freedom, layout.f)
    return bits, _emit(codec, xbase, freedom, ordering), report


def halftone_decompress(codec: Codec, freedom_bits, width: int, height: int,
                        ordering: Ordering) -> BitMatrix:
    layout = codec.layout
    if (width * height) % layout.n:
        raise DimensionMismatch(f"{width}x{height} not divisible into {layout.n}-bit blocks")
    nb = width * height // layout.n
    freedom_bits = np.asarray(freedom_bits, dtype=np.uint8).reshape(-1)
    if freedom_bits.size != nb * layout.f:
        raise LengthMismatch(f"expected {nb * layout.f} freedom bits, got {freedom_bits.size}")
    freedom = bits_to_fields(freedom_bits, layout.f) if layout.f else [0] * nb
    return _emit(codec, np.zeros(nb, dtype=np.int64), freedom, ordering)
