"""Shared run parameters and their one-line text form.

Example line::

    key=0123456789abcdef n=8 k=7 f=1 R=0 N=64 rot=13 shift=157,0

``shift=auto`` picks ``suggest_shift`` for the code size at hand, which both
ends compute identically. ``mode`` and ``contrast`` may follow as optional
fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .bitcore import BlockLayout, Ordering, build_ordering, suggest_shift
from .codec import DEFAULT_STATE_BITS, Codec, build_codec, default_rotation
from .errors import BadParams, ParseError
from .search import SearchParams

MODES = ("general", "homogeneous", "kt", "compress")
_REQUIRED = ("key", "n", "k", "f", "R", "N", "rot", "shift")
_OPTIONAL = ("mode", "contrast")


@dataclass(frozen=True)
class RunConfig:
    key: int
    layout: BlockLayout
    state_bits: int = DEFAULT_STATE_BITS
    rotation: int | None = None
    shift: tuple[int, int] | None = None  # None means suggest_shift
    mode: str = "general"
    contrast: float | None = None
    search: SearchParams = field(default_factory=SearchParams)

    def __post_init__(self):
        if not (0 <= self.key < 1 << 64):
            raise BadParams(f"key {self.key} is not a 64-bit value")
        if self.mode not in MODES:
            raise BadParams(f"unknown mode {self.mode!r}")
        if self.rotation is None:
            object.__setattr__(self, "rotation",
                               default_rotation(self.layout.n, self.state_bits))

    def codec(self) -> Codec:
        return build_codec(self.key, self.layout, self.state_bits, self.rotation)

    def ordering(self, width: int, height: int) -> Ordering:
        shift = self.shift if self.shift is not None else suggest_shift(width, height)
        return build_ordering(width, height, shift)

    def with_search(self, **changes) -> RunConfig:
        return replace(self, search=replace(self.search, **changes))

    def format(self) -> str:
        lo = self.layout
        shift = "auto" if self.shift is None else f"{self.shift[0]},{self.shift[1]}"
        parts = [
            f"key={self.key:016x}", f"n={lo.n}", f"k={lo.k}", f"f={lo.f}", f"R={lo.R}",
            f"N={self.state_bits}", f"rot={self.rotation}", f"shift={shift}",
        ]
        if self.mode != "general":
            parts.append(f"mode={self.mode}")
        if self.contrast is not None:
            parts.append(f"contrast={self.contrast!r}")
        return " ".join(parts)

    @classmethod
    def parse(cls, text: str) -> RunConfig:
        """Parse the first non-comment line of ``text``."""
        line = next(
            (ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")),
            "",
        )
        fields = {}
        offset = 0
        for token in line.split():
            pos = text.find(token, offset)
            offset = pos + len(token)
            name, sep, value = token.partition("=")
            if not sep or not value:
                raise ParseError(f"expected name=value, got {token!r}", pos)
            if name not in _REQUIRED + _OPTIONAL:
                raise ParseError(f"unknown config field {name!r}", pos)
            if name in fields:
                raise ParseError(f"duplicate config field {name!r}", pos)
            fields[name] = (value, pos)
        missing = [name for name in _REQUIRED if name not in fields]
        if missing:
            raise ParseError(f"config lacks {', '.join(missing)}", len(text))

        def number(name, base=10):
            value, pos = fields[name]
            try:
                return int(value, base)
            except ValueError:
                raise ParseError(f"{name}={value!r} is not an integer", pos) from None

        shift_text, shift_pos = fields["shift"]
        if shift_text == "auto":
            shift = None
        else:
            try:
                dx, dy = (int(v) for v in shift_text.split(","))
            except ValueError:
                raise ParseError(f"shift={shift_text!r} is not dx,dy", shift_pos) from None
            shift = (dx, dy)
        contrast = None
        if "contrast" in fields:
            value, pos = fields["contrast"]
            try:
                contrast = float(value)
            except ValueError:
                raise ParseError(f"contrast={value!r} is not a number", pos) from None
        key_text, key_pos = fields["key"]
        if len(key_text) > 16:
            raise ParseError("key has more than 64 bits", key_pos)
        return cls(
            key=number("key", 16),
            layout=BlockLayout(number("n"), number("k"), number("f"), number("R")),
            state_bits=number("N"),
            rotation=number("rot"),
            shift=shift,
            mode=fields.get("mode", ("general", 0))[0],
            contrast=contrast,
        )
