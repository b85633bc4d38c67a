"""Achieved homogeneous contrast against ensemble size, next to the optimum.

For each M0 the code is encoded for several keys on a uniform map at the
optimal contrast for the rate; the CSV lists mean blackness and the gap.
"""

import argparse
import csv
import sys
import time

import numpy as np

from halftree.analysis import entropy_inv
from halftree.bitcore import BlockLayout, GraynessMap, build_ordering
from halftree.codec import build_codec
from halftree.framing import capacity_bytes
from halftree.search import SearchParams, encode_constrained


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--layout", default="8,7,1,0")
    ap.add_argument("--m0", type=int, nargs="+", default=[1, 3, 10, 30, 100, 300, 1000])
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()
    layout = BlockLayout(*(int(v) for v in args.layout.split(",")))
    w = args.size
    target = entropy_inv(layout.rate)
    gmap = GraynessMap.uniform(w, w, target)
    ordering = build_ordering(w, w, (1, 0))
    nb = w * w // layout.n
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["m0", "optimal", "mean_blackness", "gap", "seconds_per_encode"])
    for m0 in args.m0:
        black, start = [], time.perf_counter()
        for seed in range(args.seeds):
            codec = build_codec(seed, layout)
            payload = np.random.default_rng(seed).bytes(capacity_bytes(nb, layout.k))
            matrix, _ = encode_constrained(codec, payload, gmap, ordering,
                                           SearchParams(base_ensemble=m0, max_ensemble=max(m0, 4096)))
            black.append(matrix.bits.mean())
        secs = (time.perf_counter() - start) / args.seeds
        mean = float(np.mean(black))
        out.writerow([m0, f"{target:.5f}", f"{mean:.5f}", f"{target - mean:.5f}", f"{secs:.3f}"])
        sys.stdout.flush()


if __name__ == "__main__":
    main()
