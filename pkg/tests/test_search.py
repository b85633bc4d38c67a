import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from halftree.analysis import entropy
from halftree.bitcore import BitMatrix, BlockLayout, GraynessMap, build_ordering, permute
from halftree.codec import blocks_to_bits, build_codec, encode_blocks
from halftree.decode import decode_plain
from halftree.errors import (
    DomainError,
    EnsembleDied,
    Infeasible,
    LengthMismatch,
    StepLimitExceeded,
)
from halftree.framing import bits_to_fields, frame
from halftree.search import (
    SearchParams,
    bit_costs,
    encode_constrained,
    encode_kt,
    halftone_compress,
    halftone_decompress,
    matrix_weight,
)


def _weight_oracle(bits, g):
    """Per-pixel cost written out directly from the definition."""
    total = 0.0
    for b, gi in zip(bits, g):
        eps = 0.5 - abs(0.5 - gi)
        expected = 1 if gi >= 0.5 else 0
        if b == expected:
            total += -math.log2(1 - eps)
        elif eps == 0:
            return math.inf
        else:
            total += -math.log2(eps)
    return total


def _all_codes(codec, payload, w, h, ordering):
    """Every matrix the encoder may emit for ``payload``, by brute force."""
    lo = codec.layout
    nb = w * h // lo.n
    xbase = bits_to_fields(frame(payload, nb, lo.k), lo.k) if lo.k else [0] * nb
    for fv in itertools.product(range(1 << lo.f), repeat=nb):
        xs = [xb | (f << lo.k) for xb, f in zip(xbase, fv)]
        ys, _ = encode_blocks(codec, xs)
        yield fv, permute(blocks_to_bits(ys, lo.n), ordering, "forward")


def test_bit_costs_match_definition():
    g = np.array([0.0, 1.0, 0.5, 0.7, 0.2])
    exp, match, miss = bit_costs(g)
    assert exp.tolist() == [0, 1, 1, 1, 0]
    assert match.tolist() == pytest.approx([0, 0, 1, -math.log2(0.7), -math.log2(0.8)])
    assert miss[2:].tolist() == pytest.approx([1, -math.log2(0.3), -math.log2(0.2)])
    assert np.isinf(miss[:2]).all()


@given(st.lists(st.integers(0, 1), min_size=6, max_size=6),
       st.lists(st.sampled_from([0.0, 0.1, 0.3, 0.5, 0.8, 1.0]), min_size=6, max_size=6))
def test_matrix_weight_oracle(bits, g):
    m = BitMatrix(3, 2, bits)
    assert matrix_weight(m, GraynessMap(3, 2, g)) == pytest.approx(_weight_oracle(bits, g))


@pytest.mark.parametrize("key", range(6))
def test_full_ensemble_finds_exhaustive_optimum(key):
    # DERIVED: with an ensemble at least as large as the tree the search is exact
    layout = BlockLayout(4, 0, 2, 2)
    w, h = 4, 4  # 4 blocks, 4^4 = 256 paths
    rng = np.random.default_rng(key)
    g = rng.choice([0.1, 0.3, 0.6, 0.9], size=w * h)
    gmap = GraynessMap(w, h, g)
    codec = build_codec(key, layout)
    ordering = build_ordering(w, h, (3, 1))
    best = min(_weight_oracle(bits, g) for _, bits in _all_codes(codec, b"", w, h, ordering))
    params = SearchParams(base_ensemble=256, max_ensemble=256)
    bits, matrix, report = halftone_compress(codec, gmap, ordering, params)
    assert report.final_weight == pytest.approx(best, abs=1e-9)
    assert matrix_weight(matrix, gmap) == pytest.approx(best, abs=1e-9)


@given(st.integers(0, 2**32), st.binary(max_size=20), st.sampled_from([0.5, 0.6, 0.7, 0.75]))
def test_encode_round_trip_and_weight(key, payload, g):
    layout = BlockLayout(8, 6, 1, 1)
    gmap = GraynessMap.uniform(16, 16, g)
    codec = build_codec(key, layout)
    ordering = build_ordering(16, 16, (5, 3))
    matrix, report = encode_constrained(codec, payload, gmap, ordering, SearchParams(base_ensemble=8))
    assert decode_plain(codec, matrix, ordering) == payload
    assert report.final_weight == pytest.approx(matrix_weight(matrix, gmap), rel=1e-12)
    assert len(report.freedom) == report.blocks == 32


def test_encode_honours_fixed_pixels():
    rng = np.random.default_rng(3)
    w = h = 32
    fixed = rng.random(w * h) < 0.15
    g = np.where(fixed, rng.integers(0, 2, w * h), rng.uniform(0.3, 0.7, w * h))
    gmap = GraynessMap(w, h, g)
    codec = build_codec(9, BlockLayout(8, 4, 4, 0))
    ordering = build_ordering(w, h, (7, 5))
    matrix, report = encode_constrained(codec, b"fixed", gmap, ordering)
    assert np.array_equal(matrix.bits[fixed], g[fixed])
    assert math.isfinite(report.final_weight)


def test_encode_rejects_rate_above_entropy():
    gmap = GraynessMap.uniform(8, 8, 0.9)  # h = 0.469
    with pytest.raises(Infeasible):
        encode_constrained(build_codec(0, BlockLayout(8, 7, 1, 0)), b"", gmap,
                           build_ordering(8, 8, (1, 0)))


def test_dead_first_block_raises_with_profile():
    # two fixed pixels in the first block with only two candidate values per path
    g = np.full(64, 0.5)
    codec = build_codec(0, BlockLayout(8, 6, 1, 1))
    y_options = {(codec.initial_state ^ codec.t[x]) & 0xFF for x in (0, 64)}
    # pick fixed colours contradicting both options on bits where they agree or differ
    for bits in itertools.product((0, 1), repeat=8):
        pattern = sum(b << i for i, b in enumerate(bits))
        if all(bin(pattern ^ y).count("1") >= 1 for y in y_options):
            break
    g[:8] = bits
    gmap = GraynessMap(8, 8, g)
    with pytest.raises(EnsembleDied) as info:
        encode_constrained(codec, b"", gmap, build_ordering(8, 8, (1, 0)),
                           SearchParams(base_ensemble=2, max_restarts=1))
    assert info.value.profile is not None
    assert info.value.stats.restarts == 1


def test_search_is_deterministic():
    gmap = GraynessMap(32, 32, np.linspace(0.2, 0.8, 1024))
    codec = build_codec(1, BlockLayout(8, 5, 3, 0))
    ordering = build_ordering(32, 32, (13, 7))
    a, ra = encode_constrained(codec, b"same", gmap, ordering)
    b, rb = encode_constrained(codec, b"same", gmap, ordering)
    assert a == b and ra.final_weight == rb.final_weight


def test_adaptive_schedule_grows_where_tight():
    g = np.full(1024, 0.5)
    g[:512] = 0.99  # constraint outruns freedom in the first half
    gmap = GraynessMap(32, 32, g)
    codec = build_codec(2, BlockLayout(8, 2, 6, 0))
    ordering = build_ordering(32, 32, (1, 0))
    _, rep = encode_constrained(codec, b"", gmap, ordering,
                                SearchParams(base_ensemble=4, max_ensemble=64, adaptive=True))
    sizes = rep.ensemble_sizes
    assert sizes[0] == math.ceil(4 * 2 ** (8 * (1 - entropy(0.99)) - 6))
    assert max(sizes) == 64
    assert sizes[-1] == 4  # freedom has caught up again by the end


def _kt_oracle_exists(codec, payload, g, w, h, ordering):
    fixed = g != 0.5
    return any(np.array_equal(bits[fixed], g[fixed])
               for _, bits in _all_codes(codec, payload, w, h, ordering))


@pytest.mark.parametrize("seed", range(12))
def test_kt_matches_exhaustive_existence(seed):
    # DERIVED: depth-first search succeeds exactly when some code exists
    layout = BlockLayout(4, 0, 2, 2)
    w, h = 4, 4
    rng = np.random.default_rng(seed)
    fixed = rng.random(16) < 0.45
    g = np.where(fixed, rng.integers(0, 2, 16), 0.5).astype(float)
    gmap = GraynessMap(w, h, g)
    codec = build_codec(seed, layout)
    ordering = build_ordering(w, h, (1, 0))
    exists = _kt_oracle_exists(codec, b"", g, w, h, ordering)
    try:
        matrix, rep = encode_kt(codec, b"", gmap, ordering)
    except Infeasible:
        assert not exists
        return
    assert exists
    assert np.array_equal(matrix.bits[fixed], g[fixed])
    assert rep.visited_nodes == int(rep.visits_per_depth.sum())


def test_kt_round_trip_and_step_limit():
    rng = np.random.default_rng(0)
    fixed = rng.random(1024) < 0.2
    g = np.where(fixed, rng.integers(0, 2, 1024), 0.5).astype(float)
    gmap = GraynessMap(32, 32, g)
    codec = build_codec(4, BlockLayout(8, 4, 4, 0))
    ordering = build_ordering(32, 32, (1, 0))
    matrix, rep = encode_kt(codec, b"kt payload", gmap, ordering)
    assert decode_plain(codec, matrix, ordering) == b"kt payload"
    assert np.array_equal(matrix.bits[fixed], g[fixed])
    with pytest.raises(StepLimitExceeded) as info:
        encode_kt(codec, b"kt payload", gmap, ordering, SearchParams(step_limit=10))
    assert info.value.stats.visited_nodes == 11
    with pytest.raises(DomainError):
        encode_kt(codec, b"", GraynessMap.uniform(32, 32, 0.7), ordering)


def test_compress_decompress_round_trip():
    rng = np.random.default_rng(1)
    img = rng.random(32 * 32) < 0.5
    gmap = GraynessMap(32, 32, np.where(img, 0.8, 0.2))
    codec = build_codec(6, BlockLayout(8, 0, 2, 6))
    ordering = build_ordering(32, 32, (13, 7))
    bits, matrix, report = halftone_compress(codec, gmap, ordering, SearchParams(base_ensemble=16))
    assert bits.size == 128 * 2
    assert halftone_decompress(codec, bits, 32, 32, ordering) == matrix
    # the compressed matrix agrees with the image more often than chance
    assert np.mean(matrix.bits == img) > 0.6
    with pytest.raises(LengthMismatch):
        halftone_decompress(codec, bits[:-1], 32, 32, ordering)
    with pytest.raises(DomainError):
        halftone_compress(build_codec(6, BlockLayout(8, 1, 1, 6)), gmap, ordering)
