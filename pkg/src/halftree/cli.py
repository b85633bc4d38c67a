"""Command-line entry point: ``halftree <command> ...``.

Exit codes: 0 success, 1 other errors, 2 infeasible constraints, 3 search
exhausted, 4 parse errors. Failures print one line to stderr of the form
``error code=<name> exit=<n> message=<text>``.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .bitcore import BitMatrix, BlockLayout, adjust_grayness, grayness_from_image
from .config import RunConfig
from .decode import CorrectionParams, decode_correct, decode_plain
from .errors import HalftreeError, Infeasible, ParseError, SearchExhausted
from .imageio import (
    color_to_matrix,
    image_to_matrix,
    matrix_to_color,
    read_image,
    stack_planes,
    write_matrix,
)
from .search import encode_constrained, encode_kt, halftone_compress, halftone_decompress

log = logging.getLogger("halftree")

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_EXHAUSTED, EXIT_PARSE = 0, 1, 2, 3, 4


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, Infeasible):
        return EXIT_INFEASIBLE
    if isinstance(exc, SearchExhausted):
        return EXIT_EXHAUSTED
    if isinstance(exc, ParseError):
        return EXIT_PARSE
    return EXIT_ERROR


def _load_config(path) -> RunConfig:
    return RunConfig.parse(Path(path).read_text())


def _image_levels(image):
    """Levels as one (H', W) plane; color channels are stacked top to bottom."""
    if image.channels == 1:
        return image.levels(), image.width, image.height
    return stack_planes(image)


def _gmap_for(cfg: RunConfig, args, image, mode):
    levels, w, h = _image_levels(image)
    contrast = args.contrast if getattr(args, "contrast", None) is not None else cfg.contrast
    if contrast is None:
        contrast = 0.75
        if mode == "homogeneous" and cfg.layout.k:
            # strongest contrast the rate allows
            contrast = analysis.contrast_limits(cfg.layout.rate).optimal_contrast
    return grayness_from_image(levels, image.maxval, w, h, mode=mode, contrast=contrast)


def _search_overrides(cfg: RunConfig, args) -> RunConfig:
    changes = {}
    for flag, name in (("m0", "base_ensemble"), ("max_ensemble", "max_ensemble"),
                       ("restarts", "max_restarts"), ("step_limit", "step_limit")):
        value = getattr(args, flag, None)
        if value is not None:
            changes[name] = value
    if getattr(args, "adaptive", False):
        changes["adaptive"] = True
    if "base_ensemble" in changes and "max_ensemble" not in changes:
        changes["max_ensemble"] = max(cfg.search.max_ensemble, changes["base_ensemble"])
    return cfg.with_search(**changes) if changes else cfg


def _write_code(matrix: BitMatrix, out, color: bool, fmt: str):
    if color:
        from .imageio import write_image
        data = write_image(matrix_to_color(matrix), "P6")
    else:
        data = write_matrix(matrix, fmt)
    Path(out).write_bytes(data)


def cmd_encode(args) -> int:
    cfg = _search_overrides(_load_config(args.config), args)
    image = read_image(Path(args.image).read_bytes())
    payload = Path(args.payload).read_bytes()
    mode = args.mode or (cfg.mode if cfg.mode != "compress" else "general")
    gmap = _gmap_for(cfg, args, image, mode)
    codec = cfg.codec()
    ordering = cfg.ordering(gmap.width, gmap.height)
    if mode == "kt":
        matrix, report = encode_kt(codec, payload, gmap, ordering, cfg.search)
    else:
        if args.adjust:
            gmap, lam = adjust_grayness(gmap, cfg.layout.rate, args.margin)
            log.info("grayness pulled toward 1/2 by %.6f", lam)
        matrix, report = encode_constrained(codec, payload, gmap, ordering, cfg.search)
    _write_code(matrix, args.out, image.channels > 1, args.format)
    if args.stats_csv:
        Path(args.stats_csv).write_text(report.to_csv())
    print(f"encoded {len(payload)} bytes into {matrix.width}x{matrix.height}; "
          f"weight {report.final_weight:.3f} bits")
    return EXIT_OK


def _read_code(path) -> BitMatrix:
    image = read_image(Path(path).read_bytes())
    if image.channels == 3:
        return color_to_matrix(image)
    if image.maxval == 1:
        return image_to_matrix(image)
    return BitMatrix(image.width, image.height,
                     (image.samples * 2 < image.maxval).astype(np.uint8))


def cmd_decode(args) -> int:
    cfg = _load_config(args.config)
    matrix = _read_code(args.code)
    codec = cfg.codec()
    ordering = cfg.ordering(matrix.width, matrix.height)
    if args.correct:
        params = CorrectionParams(p_b=args.pb, node_limit=args.node_limit)
        report = decode_correct(codec, matrix, ordering, params)
        payload = report.payload
        if args.stats_csv:
            Path(args.stats_csv).write_text(report.to_csv())
        print(f"corrected {len(report.corrections)} pixels, {report.nodes_visited} nodes")
    else:
        payload = decode_plain(codec, matrix, ordering)
    Path(args.out).write_bytes(payload)
    print(f"decoded {len(payload)} bytes")
    return EXIT_OK


def _pack_bits(bits) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def cmd_compress(args) -> int:
    cfg = _search_overrides(_load_config(args.config), args)
    image = read_image(Path(args.image).read_bytes())
    levels, w, h = _image_levels(image)
    contrast = args.contrast if args.contrast is not None else cfg.contrast
    if contrast is None:
        # rate-matched: constraint 1 - h(g) equals the stored fraction f/n
        contrast = analysis.contrast_limits(1.0 - cfg.layout.q).optimal_contrast
    gmap = grayness_from_image(levels, image.maxval, w, h, mode="homogeneous", contrast=contrast)
    codec = cfg.codec()
    ordering = cfg.ordering(w, h)
    bits, matrix, report = halftone_compress(codec, gmap, ordering, cfg.search)
    Path(args.out).write_bytes(_pack_bits(bits))
    if args.matrix_out:
        _write_code(matrix, args.matrix_out, False, "P4")
    if args.stats_csv:
        Path(args.stats_csv).write_text(report.to_csv())
    original = (levels.reshape(-1) * 2 < image.maxval).astype(np.uint8)
    distortion = float(np.mean(original != matrix.bits))
    print(f"stored {bits.size} bits; distortion {distortion:.4f}")
    return EXIT_OK


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise ParseError(f"size {text!r} is not WxH", 0) from None
    return w, h


def cmd_decompress(args) -> int:
    cfg = _load_config(args.config)
    w, h = _parse_size(args.size)
    codec = cfg.codec()
    layout = cfg.layout
    count = (w * h // layout.n) * layout.f
    raw = np.frombuffer(Path(args.bits).read_bytes(), dtype=np.uint8)
    bits = np.unpackbits(raw)
    if bits.size < count or bits.size - count >= 8:
        raise ParseError(f"expected {count} bits ({math.ceil(count / 8)} bytes), "
                         f"got {raw.size} bytes", raw.size)
    matrix = halftone_decompress(codec, bits[:count], w, h, cfg.ordering(w, h))
    Path(args.out).write_bytes(write_matrix(matrix, args.format))
    return EXIT_OK


def _emit_csv(rows, columns, args):
    text = analysis.to_csv(rows, columns)
    if args.csv:
        Path(args.csv).write_text(text)
    sys.stdout.write(text)


def cmd_analyze(args) -> int:
    what = args.what
    if what == "limits":
        rates = args.rates or [i / 20 for i in range(21)]
        _emit_csv(analysis.limits_table(rates), None, args)
    elif what == "pareto":
        pfs = args.pf or [0.46]
        rows = [(p, args.f / args.n, analysis.pareto_exponent(p, args.f, args.n)) for p in pfs]
        _emit_csv(rows, ("p_f", "q", "exponent"), args)
    elif what == "capacity":
        pfs = args.pf or [0.5]
        rows = [(p, *analysis.capacity_report(p)) for p in pfs]
        _emit_csv(rows, ("p_f", "kt_capacity", "damaged_ecc_capacity", "ratio"), args)
    elif what == "profile":
        if not (args.image and args.config):
            raise ParseError("profile needs --image and --config", 0)
        cfg = _load_config(args.config)
        image = read_image(Path(args.image).read_bytes())
        mode = args.mode or (cfg.mode if cfg.mode != "compress" else "general")
        gmap = _gmap_for(cfg, args, image, mode)
        rows, estimate = analysis.difficulty_profile(
            gmap, cfg.layout, cfg.ordering(gmap.width, gmap.height))
        _emit_csv(rows, None, args)
        print(f"# step_estimate {estimate:.6g}", file=sys.stderr)
    return EXIT_OK


def _selftest_checks():
    from .codec import build_codec, decode_blocks, encode_blocks
    from .imageio import read_image as rd

    yield "expected_min_ones(4,2)", analysis.expected_min_ones(4, 2) == 1.453125
    yield "pareto(0.46,1,2)", abs(analysis.pareto_exponent(0.46, 1, 2) + 0.4627) < 1e-3
    yield "pareto(0.48,1,2)", abs(analysis.pareto_exponent(0.48, 1, 2) + 0.2310) < 1e-3
    _, damaged, ratio = analysis.capacity_report(0.5)
    yield "capacity(0.5)", abs(damaged - 0.1887) < 1e-4 and abs(ratio - 2.649) < 5e-3
    yield "entropy_inv(7/8)", abs(analysis.entropy_inv(0.875) - 0.7051) < 1e-3
    codec = build_codec(1, BlockLayout(8, 6, 1, 1))
    xs = [x & 0x7F for x in range(0, 4096, 7)]
    ys, _ = encode_blocks(codec, xs)
    back, _, failed = decode_blocks(codec, ys)
    yield "codec round trip", back == xs and not failed
    m = BitMatrix(9, 2, np.arange(18) % 2)
    yield "pbm round trip", image_to_matrix(rd(write_matrix(m, "P4"))) == m


def cmd_selftest(args) -> int:
    ok = True
    for name, passed in _selftest_checks():
        ok &= bool(passed)
        print(f"{'PASS' if passed else 'FAIL'} {name}")
    return EXIT_OK if ok else EXIT_ERROR


def _add_search_flags(p):
    p.add_argument("--m0", type=int, help="base ensemble size")
    p.add_argument("--max-ensemble", type=int)
    p.add_argument("--adaptive", action="store_true",
                   help="grow the ensemble where the profile is tight")
    p.add_argument("--restarts", type=int)
    p.add_argument("--step-limit", type=int)
    p.add_argument("--stats-csv", help="per-block search statistics")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="halftree", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="hide a payload in a halftone of an image")
    p.add_argument("--image", required=True)
    p.add_argument("--payload", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("general", "homogeneous", "kt"))
    p.add_argument("--contrast", type=float)
    p.add_argument("--adjust", action="store_true",
                   help="pull grayness toward 1/2 until the rate is reachable")
    p.add_argument("--margin", type=float, default=0.0)
    p.add_argument("--format", choices=("P1", "P4"), default="P4")
    _add_search_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="read the payload back from a code")
    p.add_argument("--code", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--correct", action="store_true", help="sequential error correction")
    p.add_argument("--pb", type=float, default=0.01, help="assumed bit damage probability")
    p.add_argument("--node-limit", type=int, default=200_000)
    p.add_argument("--stats-csv")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("compress", help="lossy halftone compression of a bilevel image")
    p.add_argument("--image", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--contrast", type=float)
    p.add_argument("--matrix-out", help="also write the reproduced matrix")
    _add_search_flags(p)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="rebuild the matrix from stored bits")
    p.add_argument("--bits", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--size", required=True, help="WxH")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("P1", "P4"), default="P4")
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("analyze", help="closed-form limits as CSV")
    p.add_argument("what", choices=("limits", "pareto", "profile", "capacity"))
    p.add_argument("--pf", type=float, action="append", help="fixed-bit fraction (repeatable)")
    p.add_argument("--f", type=int, default=1)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--rates", type=float, nargs="+")
    p.add_argument("--image")
    p.add_argument("--config")
    p.add_argument("--mode", choices=("general", "homogeneous", "kt"))
    p.add_argument("--contrast", type=float)
    p.add_argument("--csv", help="also write the CSV here")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("selftest", help="quick oracle checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (HalftreeError, OSError, ValueError) as exc:
        code = _exit_code(exc)
        message = str(exc).replace("\n", " ")
        print(f"error code={type(exc).__name__} exit={code} message={message}", file=sys.stderr)
        return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
