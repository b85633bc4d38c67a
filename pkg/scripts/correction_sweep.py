"""Recovery rate of sequential error correction against bias and node budget."""

import argparse
import csv
import sys

import numpy as np

from halftree.bitcore import BitMatrix, BlockLayout, GraynessMap, build_ordering
from halftree.codec import build_codec
from halftree.decode import CorrectionParams, decode_correct
from halftree.errors import FrameError, NodeLimitExceeded
from halftree.framing import capacity_bytes
from halftree.search import SearchParams, encode_constrained


def trial(seed, layout, p_b, params, size=64):
    codec = build_codec(seed, layout)
    rng = np.random.default_rng(seed)
    ordering = build_ordering(size, size, (1, 0))
    nb = size * size // layout.n
    payload = rng.bytes(capacity_bytes(nb, layout.k))
    matrix, _ = encode_constrained(codec, payload, GraynessMap.uniform(size, size, 0.5), ordering,
                                   SearchParams(base_ensemble=1))
    damaged = BitMatrix(size, size, matrix.bits ^ (rng.random(size * size) < p_b))
    try:
        return "ok" if decode_correct(codec, damaged, ordering, params).payload == payload else "wrong"
    except NodeLimitExceeded:
        return "stalled"
    except FrameError:
        return "wrong"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--layout", default="8,6,1,1")
    ap.add_argument("--pb", type=float, default=0.01)
    ap.add_argument("--bias", type=float, nargs="+", default=[0.0, 0.0625, 0.125, 0.25])
    ap.add_argument("--node-limit", type=int, default=100_000)
    ap.add_argument("--trials", type=int, default=40)
    args = ap.parse_args()
    layout = BlockLayout(*(int(v) for v in args.layout.split(",")))
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["bias", "node_limit", "ok", "wrong", "stalled"])
    for bias in args.bias:
        params = CorrectionParams(p_b=args.pb, node_limit=args.node_limit, bias=bias)
        outcomes = [trial(s, layout, args.pb, params) for s in range(args.trials)]
        w.writerow([bias, args.node_limit] + [outcomes.count(k) for k in ("ok", "wrong", "stalled")])
        sys.stdout.flush()


if __name__ == "__main__":
    main()
