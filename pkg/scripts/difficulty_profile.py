"""Cumulative freedom against constraint for a synthetic image with fixed pixels.

Left half is a smooth gradient, right half mixes free and fixed pixels, so
the profile shows where the ensemble has to grow.
"""

import argparse
import sys

import numpy as np

from halftree.analysis import difficulty_profile, to_csv
from halftree.bitcore import BlockLayout, GraynessMap, build_ordering, suggest_shift


def synthetic_map(w, p_fixed, seed=0):
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:w, 0:w]
    g = 0.2 + 0.6 * xx / (w - 1)
    right = xx >= w // 2
    fixed = right & (rng.random((w, w)) < p_fixed)
    g = np.where(fixed, rng.integers(0, 2, (w, w)), np.where(right, 0.5, g))
    return GraynessMap(w, w, g)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--p-fixed", type=float, default=0.4)
    ap.add_argument("--layout", default="8,4,4,0")
    args = ap.parse_args()
    layout = BlockLayout(*(int(v) for v in args.layout.split(",")))
    gmap = synthetic_map(args.size, args.p_fixed)
    ordering = build_ordering(args.size, args.size, suggest_shift(args.size, args.size))
    rows, estimate = difficulty_profile(gmap, layout, ordering)
    to_csv(rows, stream=sys.stdout)
    print(f"# step_estimate {estimate:.6g}", file=sys.stderr)


if __name__ == "__main__":
    main()
