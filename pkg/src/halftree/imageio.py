"""Netpbm (PBM/PGM/PPM) reading and writing, plus measured grayness of codes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bitcore import BitMatrix, GraynessMap
from .errors import DimensionMismatch, DomainError, ParseError, UnsupportedFormat

_WHITESPACE = b" \t\n\r\x0b\x0c"
_CHANNELS = {b"P1": 1, b"P2": 1, b"P3": 3, b"P4": 1, b"P5": 1, b"P6": 3}


@dataclass(frozen=True, eq=False)
class RasterImage:
    width: int
    height: int
    channels: int
    maxval: int
    samples: np.ndarray  # row-major, interleaved channels

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.int64).reshape(-1)
        if s.size != self.width * self.height * self.channels:
            raise DimensionMismatch(
                f"{s.size} samples for {self.width}x{self.height}x{self.channels}"
            )
        if not (1 <= self.maxval <= 65535):
            raise DomainError(f"maxval {self.maxval} outside 1..65535")
        if s.size and (s.min() < 0 or s.max() > self.maxval):
            raise DomainError("sample exceeds maxval")
        object.__setattr__(self, "samples", s)

    def plane(self, c: int) -> np.ndarray:
        return self.samples.reshape(-1, self.channels)[:, c]

    def levels(self) -> np.ndarray:
        """Samples as a (height, width) or (height, width, channels) array."""
        shape = (self.height, self.width) if self.channels == 1 else (
            self.height, self.width, self.channels)
        return self.samples.reshape(shape)


def split_planes(image: RasterImage) -> list[RasterImage]:
    """One single-channel image per color channel."""
    return [
        RasterImage(image.width, image.height, 1, image.maxval, image.plane(c))
        for c in range(image.channels)
    ]


def merge_planes(planes) -> RasterImage:
    first = planes[0]
    if any((p.width, p.height, p.maxval, p.channels) != (first.width, first.height, first.maxval, 1)
           for p in planes):
        raise DimensionMismatch("planes differ in size, maxval or channel count")
    samples = np.stack([p.samples for p in planes], axis=1).reshape(-1)
    return RasterImage(first.width, first.height, len(planes), first.maxval, samples)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def skip_space(self):
        data, n = self.data, len(self.data)
        while self.pos < n:
            c = data[self.pos : self.pos + 1]
            if c == b"#":
                end = data.find(b"\n", self.pos)
                self.pos = n if end < 0 else end + 1
            elif c in _WHITESPACE:
                self.pos += 1
            else:
                break

    def token(self) -> bytes:
        self.skip_space()
        start = self.pos
        data, n = self.data, len(self.data)
        while self.pos < n and data[self.pos : self.pos + 1] not in _WHITESPACE \
                and data[self.pos : self.pos + 1] != b"#":
            self.pos += 1
        if start == self.pos:
            raise ParseError("unexpected end of data", self.pos)
        return data[start : self.pos]

    def integer(self) -> int:
        start = self.pos
        tok = self.token()
        if not tok.isdigit():
            raise ParseError(f"expected an integer, got {tok[:16]!r}", start)
        return int(tok)


def read_image(data: bytes) -> RasterImage:
    """Parse any of P1..P6. PBM bit 1 (black) becomes sample 0 with maxval 1."""
    if len(data) < 2:
        raise ParseError("truncated header", len(data))
    magic = bytes(data[:2])
    if magic not in _CHANNELS:
        raise UnsupportedFormat(f"unknown magic {magic!r}", 0)
    rd = _Reader(bytes(data))
    rd.pos = 2
    width = rd.integer()
    height = rd.integer()
    if width < 1 or height < 1:
        raise ParseError(f"bad dimensions {width}x{height}", rd.pos)
    bitmap = magic in (b"P1", b"P4")
    maxval = 1 if bitmap else rd.integer()
    if not (1 <= maxval <= 65535):
        raise ParseError(f"maxval {maxval} outside 1..65535", rd.pos)
    channels = _CHANNELS[magic]
    count = width * height * channels

    if magic == b"P1":
        # P1 digits need not be separated by whitespace
        values = []
        while len(values) < count:
            rd.skip_space()
            if rd.pos >= len(rd.data):
                raise ParseError(f"only {len(values)} of {count} bits", rd.pos)
            ch = rd.data[rd.pos : rd.pos + 1]
            if ch not in (b"0", b"1"):
                raise ParseError(f"bad bit {ch!r}", rd.pos)
            values.append(1 - int(ch))
            rd.pos += 1
        samples = np.array(values, dtype=np.int64)
    elif magic in (b"P2", b"P3"):
        samples = np.array([rd.integer() for _ in range(count)], dtype=np.int64)
        if samples.size and samples.max() > maxval:
            raise ParseError("sample exceeds maxval", rd.pos)
    else:
        if rd.pos >= len(rd.data) or rd.data[rd.pos : rd.pos + 1] not in _WHITESPACE:
            raise ParseError("missing whitespace before raster", rd.pos)
        start = rd.pos + 1
        if magic == b"P4":
            row_bytes = (width + 7) // 8
            need = row_bytes * height
            raw = rd.data[start : start + need]
            if len(raw) < need:
                raise ParseError(f"raster truncated: {len(raw)} of {need} bytes", start + len(raw))
            bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8).reshape(height, row_bytes),
                                 axis=1)[:, :width]
            samples = 1 - bits.reshape(-1).astype(np.int64)
        else:
            width_bytes = 1 if maxval < 256 else 2
            need = count * width_bytes
            raw = rd.data[start : start + need]
            if len(raw) < need:
                raise ParseError(f"raster truncated: {len(raw)} of {need} bytes", start + len(raw))
            dtype = np.uint8 if width_bytes == 1 else np.dtype(">u2")
            samples = np.frombuffer(raw, dtype=dtype).astype(np.int64)
            if samples.max(initial=0) > maxval:
                raise ParseError("sample exceeds maxval", start)
    return RasterImage(width, height, channels, maxval, samples)


def write_image(image: RasterImage, fmt: str) -> bytes:
    """Serialize to P1..P6. Bitmap formats need maxval 1 and write sample 0 as bit 1."""
    fmt = fmt.upper()
    if fmt not in ("P1", "P2", "P3", "P4", "P5", "P6"):
        raise UnsupportedFormat(f"unknown format {fmt}")
    if _CHANNELS[fmt.encode()] != image.channels:
        raise DimensionMismatch(f"{fmt} needs {_CHANNELS[fmt.encode()]} channel(s)")
    w, h = image.width, image.height
    if fmt in ("P1", "P4"):
        if image.maxval != 1:
            raise DomainError("bitmap formats need maxval 1")
        return write_matrix(BitMatrix(w, h, 1 - image.samples), fmt)
    header = f"{fmt}\n{w} {h}\n{image.maxval}\n".encode()
    if fmt in ("P2", "P3"):
        per_row = w * image.channels
        rows = image.samples.reshape(h, per_row)
        body = "\n".join(" ".join(str(v) for v in row) for row in rows.tolist())
        return header + body.encode() + b"\n"
    dtype = np.uint8 if image.maxval < 256 else np.dtype(">u2")
    return header + image.samples.astype(dtype).tobytes()


def write_matrix(matrix: BitMatrix, fmt: str = "P4") -> bytes:
    """PBM bytes for a code matrix; black (1) is written as PBM 1."""
    fmt = fmt.upper()
    w, h = matrix.width, matrix.height
    grid = matrix.as_array()
    if fmt == "P1":
        rows = ["".join("1" if b else "0" for b in row) for row in grid.tolist()]
        # keep lines under 70 characters as netpbm suggests
        lines = []
        for row in rows:
            lines.extend(row[i : i + 70] for i in range(0, len(row), 70))
        return f"P1\n{w} {h}\n".encode() + "\n".join(lines).encode() + b"\n"
    if fmt == "P4":
        packed = np.packbits(grid, axis=1)  # pads each row with zero bits
        return f"P4\n{w} {h}\n".encode() + packed.tobytes()
    raise UnsupportedFormat(f"matrices are written as P1 or P4, not {fmt}")


def image_to_matrix(image: RasterImage) -> BitMatrix:
    """Bit matrix of a bilevel image; sample 0 is black."""
    if image.channels != 1:
        raise DimensionMismatch("need a single-channel image")
    return BitMatrix(image.width, image.height, (image.samples == 0).astype(np.uint8))


def stack_planes(image: RasterImage) -> tuple[np.ndarray, int, int]:
    """Channels of an image stacked vertically: (levels of shape (C*H, W), W, C*H)."""
    planes = [image.plane(c).reshape(image.height, image.width) for c in range(image.channels)]
    levels = np.concatenate(planes, axis=0)
    return levels, image.width, image.height * image.channels


def matrix_to_color(matrix: BitMatrix, channels: int = 3) -> RasterImage:
    """Inverse of stacking: a (C*H) x W code becomes a C-channel image, black bit = 0."""
    if matrix.height % channels:
        raise DimensionMismatch(f"height {matrix.height} not divisible by {channels}")
    h = matrix.height // channels
    planes = matrix.as_array().reshape(channels, h, matrix.width)
    samples = np.where(np.moveaxis(planes, 0, -1) == 1, 0, 255).reshape(-1)
    return RasterImage(matrix.width, h, channels, 255, samples)


def color_to_matrix(image: RasterImage) -> BitMatrix:
    """Stack the channels of a color code into one bit matrix; dark samples are black."""
    levels, w, h = stack_planes(image)
    return BitMatrix(w, h, (levels.reshape(-1) * 2 < image.maxval).astype(np.uint8))


@dataclass(frozen=True)
class BucketStat:
    lower: float
    upper: float
    target_mean: float
    observed: float
    count: int

    CSV_COLUMNS = ("lower", "upper", "target_mean", "observed", "count")


def empirical_grayness(matrix: BitMatrix, gmap: GraynessMap,
                       bucket_width: float = 0.1) -> list[BucketStat]:
    """Observed black fraction per grayness bucket. Empty buckets are omitted.

    Buckets are [i*w, (i+1)*w) with the last one closed, so together they cover [0, 1].
    """
    if (matrix.width, matrix.height) != (gmap.width, gmap.height):
        raise DimensionMismatch("matrix and map sizes differ")
    if not (0 < bucket_width <= 1):
        raise DomainError("bucket width must lie in (0, 1]")
    nbuckets = int(np.ceil(1.0 / bucket_width - 1e-12))
    idx = np.minimum((gmap.g / bucket_width).astype(np.int64), nbuckets - 1)
    out = []
    for i in range(nbuckets):
        sel = idx == i
        count = int(sel.sum())
        if not count:
            continue
        out.append(BucketStat(
            lower=i * bucket_width,
            upper=min(1.0, (i + 1) * bucket_width),
            target_mean=float(gmap.g[sel].mean()),
            observed=float(matrix.bits[sel].mean()),
            count=count,
        ))
    return out
