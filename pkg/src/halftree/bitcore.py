"""Bit matrices, block layouts, pixel orderings and grayness maps.

Conventions: bit 1 is black, bit 0 is white. Grayness is the probability of
black, so an image level of 0 (dark) maps to g = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import entropy_array
from .errors import (
    BadContrast,
    BadParams,
    DimensionMismatch,
    DomainError,
    Infeasible,
    LengthMismatch,
    NonPermutation,
)

MAX_BLOCK_BITS = 16


@dataclass(frozen=True, eq=False)
class BitMatrix:
    width: int
    height: int
    bits: np.ndarray  # uint8, row-major, length width*height

    def __post_init__(self):
        bits = np.ascontiguousarray(self.bits, dtype=np.uint8).reshape(-1)
        if bits.size != self.width * self.height:
            raise LengthMismatch(
                f"{bits.size} bits for a {self.width}x{self.height} matrix"
            )
        if bits.size and bits.max() > 1:
            raise DomainError("bit values must be 0 or 1")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    def __eq__(self, other):
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.bits, other.bits)
        )

    def as_array(self) -> np.ndarray:
        return self.bits.reshape(self.height, self.width)


@dataclass(frozen=True)
class BlockLayout:
    """Split of each n-bit block into payload, freedom and redundancy fields.

    Fields sit in x from the least significant bit: payload, then freedom,
    then redundancy.
    """

    n: int
    k: int
    f: int
    R: int

    def __post_init__(self):
        if min(self.n, self.k, self.f, self.R) < 0:
            raise BadParams(f"negative field in {self}")
        if not (1 <= self.n <= MAX_BLOCK_BITS):
            raise BadParams(f"block size n={self.n} outside 1..{MAX_BLOCK_BITS}")
        if self.k + self.f + self.R != self.n:
            raise BadParams(f"k+f+R = {self.k + self.f + self.R} != n = {self.n}")

    @property
    def q(self) -> float:
        return self.f / self.n

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def payload_mask(self) -> int:
        return (1 << self.k) - 1

    @property
    def redundancy_mask(self) -> int:
        return ((1 << self.R) - 1) << (self.k + self.f)


@dataclass(frozen=True, eq=False)
class GraynessMap:
    width: int
    height: int
    g: np.ndarray  # float64, row-major

    def __post_init__(self):
        g = np.array(self.g, dtype=np.float64).reshape(-1)
        if g.size != self.width * self.height:
            raise DimensionMismatch(
                f"{g.size} values for a {self.width}x{self.height} map"
            )
        if np.any(np.isnan(g)) or np.any((g < 0) | (g > 1)):
            raise DomainError("grayness values must lie in [0, 1]")
        g.setflags(write=False)
        object.__setattr__(self, "g", g)

    @classmethod
    def uniform(cls, width, height, g):
        return cls(width, height, np.full(width * height, float(g)))

    @property
    def epsilon(self) -> np.ndarray:
        """Probability of the unexpected color: 1/2 - |1/2 - g|."""
        return 0.5 - np.abs(0.5 - self.g)

    @property
    def fixed(self) -> np.ndarray:
        return (self.g == 0.0) | (self.g == 1.0)

    def mean_entropy(self) -> float:
        """Mean of h(g) over all pixels; fixed pixels contribute 0."""
        if self.g.size == 0:
            return 0.0
        return float(entropy_array(self.g).mean())


@dataclass(frozen=True, eq=False)
class Ordering:
    """Bijection from bit-stream index to pixel index."""

    width: int
    height: int
    perm: np.ndarray
    params: tuple[int, int]
    inverse: np.ndarray = field(repr=False)


def suggest_shift(width: int, height: int) -> tuple[int, int]:
    """A shift pair near the golden ratio of each side that yields a valid ordering."""
    phi = (math.sqrt(5) - 1) / 2
    dx0 = max(1, round(width * phi))
    dy0 = max(0, round(height * phi))
    for ddx in range(width):
        dx = (dx0 + ddx) % width or 1
        if math.gcd(dx, width) != 1:
            continue
        for ddy in range(height):
            dy = (dy0 + ddy) % height
            if math.gcd(width * dy + 1, height) == 1:
                return dx, dy
    return 1, 0


def build_ordering(width: int, height: int, shift: tuple[int, int]) -> Ordering:
    """Pixel ordering from a 2D shift taken modulo the code dimensions.

    Stream index i goes to column (i*dx) mod W and row (i*dy + i//W) mod H.
    The extra row advance per W steps lets non-raster shifts cover the
    whole grid. Raises NonPermutation if any pixel is hit twice.
    """
    if width < 1 or height < 1:
        raise BadParams(f"bad dimensions {width}x{height}")
    dx, dy = (int(v) for v in shift)
    i = np.arange(width * height, dtype=np.int64)
    cols = (i * dx) % width
    rows = (i * dy + i // width) % height
    perm = rows * width + cols
    inverse = np.full(perm.size, -1, dtype=np.int64)
    inverse[perm] = i
    if np.any(inverse < 0):
        raise NonPermutation(f"shift {(dx, dy)} revisits pixels on {width}x{height}")
    perm.setflags(write=False)
    inverse.setflags(write=False)
    return Ordering(width, height, perm, (dx, dy), inverse)


def permute(bits, ordering: Ordering, direction: str = "forward") -> np.ndarray:
    """Forward: stream index i lands on pixel perm[i]. Inverse undoes it."""
    bits = np.asarray(bits).reshape(-1)
    if bits.size != ordering.perm.size:
        raise LengthMismatch(f"{bits.size} bits for ordering of {ordering.perm.size}")
    if direction == "forward":
        out = np.empty_like(bits)
        out[ordering.perm] = bits
        return out
    if direction == "inverse":
        return bits[ordering.perm]
    raise ValueError(f"unknown direction {direction!r}")


def grayness_from_image(
    levels,
    maxval: int,
    width: int | None = None,
    height: int | None = None,
    mode: str = "general",
    contrast: float = 0.75,
    thresholds: tuple[float, float] | None = None,
) -> GraynessMap:
    """Turn grayscale levels into a grayness map.

    ``general``: g = 1 - level/maxval. ``homogeneous``: pixels darker than
    half scale get ``contrast``, the rest 1 - contrast. ``kt``: levels at or
    below ``thresholds[0]`` are fixed black, at or above ``thresholds[1]``
    fixed white, and everything between is free (g = 1/2).
    """
    levels = np.asarray(levels)
    if width is None or height is None:
        if levels.ndim != 2:
            raise DimensionMismatch("pass width/height for flat level arrays")
        height, width = levels.shape
    if maxval < 1:
        raise DomainError(f"maxval={maxval} must be >= 1")
    norm = levels.reshape(-1).astype(np.float64) / float(maxval)
    if norm.size != width * height:
        raise DimensionMismatch(f"{norm.size} levels for {width}x{height}")
    if mode == "general":
        g = 1.0 - norm
    elif mode == "homogeneous":
        if not (0.5 <= contrast <= 1.0):
            raise BadContrast(f"contrast {contrast} outside [1/2, 1]")
        g = np.where(norm < 0.5, contrast, 1.0 - contrast)
    elif mode == "kt":
        lo, hi = thresholds if thresholds is not None else (0.25 * maxval, 0.75 * maxval)
        raw = levels.reshape(-1)
        g = np.full(norm.size, 0.5)
        g[raw <= lo] = 1.0
        g[raw >= hi] = 0.0
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return GraynessMap(width, height, g)


def shrink_toward_half(g, lam):
    return g + lam * (0.5 - g)


def adjust_grayness(gmap: GraynessMap, target_rate: float, margin: float = 0.0):
    """Pull free pixels toward 1/2 until the mean entropy reaches the target.

    One global factor lam in [0, 1] is used, g' = g + lam (1/2 - g), found by
    bisection. Fixed pixels (g in {0, 1}) are untouched; they stay in the mean
    with h = 0, so too many of them make the target unreachable. Returns
    ``(new_map, lam)``.
    """
    target = target_rate + margin
    if target > 1.0:
        raise DomainError(f"target rate {target} exceeds 1")
    free = ~gmap.fixed
    if not free.any():
        raise Infeasible("no adjustable pixels: every pixel is fixed")
    g_free = gmap.g[free]
    total = gmap.g.size

    def mean_h(lam):
        return float(entropy_array(shrink_toward_half(g_free, lam)).sum()) / total

    if mean_h(0.0) >= target:
        return gmap, 0.0
    if mean_h(1.0) < target:
        raise Infeasible(
            f"only {g_free.size / total:.4f} of pixels are free; cannot reach mean entropy {target}"
        )
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mean_h(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    lam = hi
    g = gmap.g.copy()
    g[free] = shrink_toward_half(g_free, lam)
    return GraynessMap(gmap.width, gmap.height, g), lam
