"""Closed-form limits and search-difficulty estimates.

Everything here is a pure function of its arguments. Rows returned by the
report functions have a ``CSV_COLUMNS`` tuple describing their column order;
``to_csv`` writes any list of them.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import astuple, dataclass
from math import comb

import numpy as np

from .errors import DomainError, NoRoot

_BISECT_ITERS = 200


def _check_prob(p, name="p"):
    if not (0.0 <= p <= 1.0) or math.isnan(p):
        raise DomainError(f"{name}={p!r} outside [0, 1]")


def entropy(p: float) -> float:
    """Binary entropy in bits, with h(0) = h(1) = 0."""
    _check_prob(p)
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def entropy_array(p) -> np.ndarray:
    """Elementwise binary entropy for arrays of probabilities."""
    p = np.asarray(p, dtype=np.float64)
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise DomainError("probabilities outside [0, 1]")
    out = np.zeros_like(p)
    inner = (p > 0) & (p < 1)
    q = p[inner]
    out[inner] = -q * np.log2(q) - (1 - q) * np.log2(1 - q)
    return out


def entropy_inv(r: float, branch: str = "upper") -> float:
    """Probability p with h(p) = r on the lower ([0, 1/2]) or upper branch."""
    _check_prob(r, "r")
    if branch not in ("lower", "upper"):
        raise DomainError(f"unknown branch {branch!r}")
    # h is increasing on [0, 1/2]
    lo, hi = 0.0, 0.5
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if entropy(mid) < r:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    p = 0.5 * (lo + hi)
    if r == 1.0:
        p = 0.5
    elif r == 0.0:
        p = 0.0
    return p if branch == "lower" else 1.0 - p


@dataclass(frozen=True)
class LimitsRow:
    rate: float
    optimal_contrast: float
    systematic_contrast: float
    damaged_ecc_contrast: float

    CSV_COLUMNS = ("rate", "optimal_contrast", "systematic_contrast", "damaged_ecc_contrast")


def contrast_limits(rate: float) -> LimitsRow:
    """Maximal homogeneous contrast at ``rate`` for three coding strategies.

    optimal: h(g) = rate. systematic: payload bits stay at 1/2 and the rest
    are forced, so rate = 1 - 2|g - 1/2|. damaged ECC: flip |g - 1/2| of a
    uniform code and pay the BSC limit, rate = 1 - h(g - 1/2).
    """
    _check_prob(rate, "rate")
    optimal = entropy_inv(rate, "upper")
    systematic = 1.0 - rate / 2.0
    damaged = 0.5 + entropy_inv(1.0 - rate, "lower")
    return LimitsRow(rate, optimal, systematic, damaged)


def limits_table(rates) -> list[LimitsRow]:
    return [contrast_limits(float(r)) for r in rates]


def expected_min_ones(n: int, m: float) -> float:
    """Expected minimum weight among ``m`` independent uniform ``n``-bit blocks.

    E[min] = sum_{i=1..n} P(X >= i)^m with X ~ Binomial(n, 1/2). Tail
    probabilities are exact integers over 2^n, so for n <= 24 they convert to
    float without rounding; ``m`` may be non-integer.
    """
    if not (1 <= n <= 24) or int(n) != n:
        raise DomainError(f"n={n!r} outside 1..24")
    if not (m >= 1):
        raise DomainError(f"m={m!r} must be >= 1")
    total = 1 << n
    tail = total  # count of blocks with weight >= i
    result = 0.0
    for i in range(1, n + 1):
        tail -= comb(n, i - 1)
        result += (tail / total) ** m
    return result


def _pareto_residual(c, p_f, q):
    return 2.0 ** (c * q) - (2.0 ** c * p_f + (1.0 - p_f))


def pareto_exponent(p_f: float, f: int, n: int) -> float:
    """Tail exponent c <= 0 of the per-step search cost for fixed-bit constraints.

    With q = f/n, the positive root c' of 2^(c' q) = 2^c' p_f + (1 - p_f) is
    found by bisection and returned negated, so that P(step cost > m) ~ m^c.
    Returns 0 at p_f == q and -inf when no finite root exists (f == n).
    """
    if not (0.0 < p_f < 1.0):
        raise DomainError(f"p_f={p_f!r} must lie in (0, 1)")
    if not (0 < f <= n):
        raise DomainError(f"need 0 < f <= n, got f={f}, n={n}")
    q = f / n
    if p_f == q:
        return 0.0
    if p_f > q:
        raise NoRoot(f"p_f={p_f} exceeds freedom level q={q}: no positive root")
    if f == n:
        return -math.inf
    # residual rises from 0, peaks where 2^(c(1-q)) = q/p_f, then falls below 0
    lo = math.log2(q / p_f) / (1.0 - q)
    hi = max(64.0, 2.0 * lo)
    while _pareto_residual(hi, p_f, q) > 0:
        hi *= 2.0
        if hi > 1e6:
            raise NoRoot("root out of numeric range")
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if _pareto_residual(mid, p_f, q) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return -0.5 * (lo + hi)


@dataclass(frozen=True)
class ProfileRow:
    block_index: int
    freedom_cum: float
    constraint_cum: float
    log2_population: float

    CSV_COLUMNS = ("block_index", "freedom_cum", "constraint_cum", "log2_population")


def constraint_per_bit(g) -> np.ndarray:
    """Bits of constraint each pixel imposes: 1 - h(g); 1 for fixed pixels."""
    return 1.0 - entropy_array(g)


def difficulty_profile(gmap, layout, ordering) -> tuple[list[ProfileRow], float]:
    """Cumulative freedom vs constraint per block, in stream order.

    ``step_estimate`` sums 2^max(0, C_i - F_i): an order-of-magnitude count of
    search steps, without any per-position constant factor.
    """
    stream_g = np.asarray(gmap.g, dtype=np.float64).reshape(-1)[ordering.perm]
    n = layout.n
    if stream_g.size % n:
        raise DomainError(f"{stream_g.size} pixels not divisible by block size {n}")
    per_block = constraint_per_bit(stream_g).reshape(-1, n).sum(axis=1)
    constraint = np.cumsum(per_block)
    rows = []
    estimate = 0.0
    for i, c in enumerate(constraint, start=1):
        fcum = float(layout.f * i)
        rows.append(ProfileRow(i, fcum, float(c), fcum - float(c)))
        deficit = max(0.0, float(c) - fcum)
        estimate += math.inf if deficit > 1000 else 2.0 ** deficit
    return rows, estimate


def capacity_report(p_f: float) -> tuple[float, float, float]:
    """(fixed-bit channel limit, damaged-ECC limit, their ratio) at fixed fraction ``p_f``.

    The ratio is NaN when both limits vanish (p_f == 1).
    """
    _check_prob(p_f, "p_f")
    kt = 1.0 - p_f
    damaged = 1.0 - entropy(p_f / 2.0)
    ratio = kt / damaged if damaged > 0 else math.nan
    return kt, damaged, ratio


def to_csv(rows, columns=None, stream=None) -> str:
    """Write dataclass rows (or plain tuples with ``columns``) as CSV."""
    buf = stream if stream is not None else io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    rows = list(rows)
    if columns is None and rows:
        columns = type(rows[0]).CSV_COLUMNS
    if columns:
        writer.writerow(columns)
    for row in rows:
        writer.writerow(astuple(row) if hasattr(row, "__dataclass_fields__") else tuple(row))
    return buf.getvalue() if stream is None else ""
