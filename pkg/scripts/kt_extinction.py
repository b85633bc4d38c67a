"""Why fixed-bit encoding fails at p_f = 0.4, q = 1/2: the search tree dies out.

Each block node has 2^f children; a child survives when all j fixed pixels of
the block get their colour, probability 2^-j, with j ~ Binomial(n, p_f).
Treating children as independent gives a Galton-Watson process whose
extinction probability x solves x = E[(1 - 2^-J (1 - x))^(2^f)]. The script
prints that fixed point next to the empirical failure rate of encode_kt.
"""

import argparse
import csv
import sys
from math import comb

import numpy as np

from halftree.bitcore import BlockLayout, GraynessMap, build_ordering
from halftree.codec import build_codec
from halftree.errors import Infeasible, StepLimitExceeded
from halftree.framing import capacity_bytes
from halftree.search import SearchParams, encode_kt


def extinction(n, f, p_f, iters=10_000):
    probs = [comb(n, j) * p_f**j * (1 - p_f) ** (n - j) for j in range(n + 1)]
    x = 0.0
    for _ in range(iters):
        x_new = sum(pj * (1 - 2.0**-j * (1 - x)) ** (1 << f) for j, pj in enumerate(probs))
        if abs(x_new - x) < 1e-15:
            break
        x = x_new
    return x


def empirical(layout, p_f, trials, size=64):
    codec = build_codec(0, layout)
    ordering = build_ordering(size, size, (1, 0))
    nb = size * size // layout.n
    failures = 0
    for seed in range(trials):
        rng = np.random.default_rng(1000 + seed)
        fixed = rng.random(size * size) < p_f
        g = np.where(fixed, rng.integers(0, 2, size * size), 0.5).astype(float)
        try:
            encode_kt(codec, rng.bytes(capacity_bytes(nb, layout.k)),
                      GraynessMap(size, size, g), ordering, SearchParams(step_limit=10**6))
        except (Infeasible, StepLimitExceeded):
            failures += 1
    return failures / trials


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pf", type=float, default=0.4)
    ap.add_argument("--trials", type=int, default=100)
    args = ap.parse_args()
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["n", "f", "p_f", "extinction_model", "failure_rate"])
    for n in (2, 4, 8, 16):
        layout = BlockLayout(n, n // 2, n // 2, 0)
        ext = extinction(n, n // 2, args.pf)
        rate = empirical(layout, args.pf, args.trials) if args.trials else float("nan")
        w.writerow([n, n // 2, args.pf, f"{ext:.4f}", f"{rate:.3f}"])
        sys.stdout.flush()


if __name__ == "__main__":
    main()
