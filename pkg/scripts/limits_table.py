"""Maximal homogeneous contrast per rate for the three coding strategies."""

import argparse
import sys

import numpy as np

from halftree.analysis import limits_table, to_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=40)
    args = ap.parse_args()
    rates = np.linspace(0, 1, args.steps + 1)
    to_csv(limits_table(rates), stream=sys.stdout)


if __name__ == "__main__":
    main()
