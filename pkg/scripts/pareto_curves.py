"""Pareto tail exponent of the fixed-bit search as a function of p_f, one column per q."""

import argparse
import csv
import sys

import numpy as np

from halftree.analysis import pareto_exponent

LAYOUTS = ((1, 4), (1, 2), (3, 4))  # (f, n)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=50)
    args = ap.parse_args()
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["p_f"] + [f"c_q={f}/{n}" for f, n in LAYOUTS])
    for p in np.linspace(0.01, 0.99, args.points):
        row = [f"{p:.4f}"]
        for f, n in LAYOUTS:
            row.append(f"{pareto_exponent(float(p), f, n):.6f}" if p <= f / n else "")
        w.writerow(row)


if __name__ == "__main__":
    main()
