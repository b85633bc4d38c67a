import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from halftree import analysis
from halftree.bitcore import BlockLayout, adjust_grayness, grayness_from_image
from halftree.cli import main
from halftree.config import RunConfig
from halftree.decode import decode_plain
from halftree.errors import BadParams, ParseError
from halftree.imageio import RasterImage, image_to_matrix, read_image, write_image, write_matrix
from halftree.search import encode_constrained, halftone_compress

CFG = "key=00000000000000ab n=8 k=7 f=1 R=0 N=64 rot=13 shift=auto\n"


@pytest.fixture
def workdir(tmp_path):
    y, x = np.mgrid[0:64, 0:64]
    levels = (8 + x * 3.8).astype(int)
    (tmp_path / "grad.pgm").write_bytes(write_image(RasterImage(64, 64, 1, 255, levels), "P5"))
    (tmp_path / "pay.bin").write_bytes(b"payload bytes " * 6)
    (tmp_path / "cfg").write_text(CFG)
    return tmp_path


def run(*argv):
    return main([str(a) for a in argv])


def test_encode_decode_round_trip(workdir):
    d = workdir
    assert run("encode", "--image", d / "grad.pgm", "--payload", d / "pay.bin", "--config",
               d / "cfg", "--out", d / "code.pbm", "--adjust", "--margin", 0.05,
               "--stats-csv", d / "stats.csv") == 0
    assert run("decode", "--code", d / "code.pbm", "--config", d / "cfg", "--out", d / "out.bin") == 0
    assert (d / "out.bin").read_bytes() == (d / "pay.bin").read_bytes()
    assert (d / "stats.csv").read_text().startswith("block_index,ensemble_size")


def test_cli_encode_equals_module_composition(workdir):
    d = workdir
    run("encode", "--image", d / "grad.pgm", "--payload", d / "pay.bin", "--config", d / "cfg",
        "--out", d / "code.pbm", "--adjust", "--margin", 0.05)
    cfg = RunConfig.parse(CFG)
    img = read_image((d / "grad.pgm").read_bytes())
    gmap, _ = adjust_grayness(grayness_from_image(img.levels(), 255), cfg.layout.rate, 0.05)
    matrix, _ = encode_constrained(cfg.codec(), (d / "pay.bin").read_bytes(), gmap,
                                   cfg.ordering(64, 64), cfg.search)
    assert (d / "code.pbm").read_bytes() == write_matrix(matrix, "P4")
    assert decode_plain(cfg.codec(), matrix, cfg.ordering(64, 64)) == (d / "pay.bin").read_bytes()


def test_color_round_trip(workdir):
    d = workdir
    y, x = np.mgrid[0:32, 0:32]
    lv = (20 + x * 6).astype(int)
    rgb = np.stack([lv, lv[::-1], lv.T], axis=-1)
    (d / "c.ppm").write_bytes(write_image(RasterImage(32, 32, 3, 255, rgb), "P6"))
    assert run("encode", "--image", d / "c.ppm", "--payload", d / "pay.bin", "--config", d / "cfg",
               "--out", d / "c_code.ppm", "--adjust") == 0
    assert read_image((d / "c_code.ppm").read_bytes()).channels == 3
    assert run("decode", "--code", d / "c_code.ppm", "--config", d / "cfg", "--out", d / "o") == 0
    assert (d / "o").read_bytes() == (d / "pay.bin").read_bytes()


def test_exit_codes(workdir, capsys):
    d = workdir
    # rate 7/8 is above what the unadjusted gradient allows
    assert run("encode", "--image", d / "grad.pgm", "--payload", d / "pay.bin", "--config",
               d / "cfg", "--out", d / "x.pbm") == 2
    err = capsys.readouterr().err
    assert err.startswith("error code=Infeasible exit=2 message=")
    (d / "bad").write_text("key=zz n=8\n")
    assert run("decode", "--code", d / "x.pbm", "--config", d / "bad", "--out", d / "o") == 4
    assert "exit=4" in capsys.readouterr().err
    # an all-black target: the first block has two candidates and neither is all black
    (d / "black.pbm").write_bytes(write_matrix(image_to_matrix(
        RasterImage(8, 8, 1, 1, np.zeros(64, dtype=int))), "P4"))
    (d / "kcfg").write_text("key=0 n=8 k=0 f=1 R=7 N=64 rot=13 shift=1,0\n")
    (d / "empty").write_bytes(b"")
    code = run("encode", "--image", d / "black.pbm", "--payload", d / "empty", "--config",
               d / "kcfg", "--out", d / "y.pbm", "--mode", "general", "--restarts", 0)
    assert code == 3
    assert "code=EnsembleDied exit=3" in capsys.readouterr().err


def test_compress_decompress(workdir):
    d = workdir
    (d / "ccfg").write_text("key=0000000000000001 n=8 k=0 f=2 R=6 N=64 rot=13 shift=auto\n")
    y, x = np.mgrid[0:32, 0:32]
    bw = np.where((x // 8 + y // 8) % 2 == 0, 0, 1)
    (d / "bw.pbm").write_bytes(write_image(RasterImage(32, 32, 1, 1, bw), "P4"))
    assert run("compress", "--image", d / "bw.pbm", "--config", d / "ccfg", "--out", d / "b.bin",
               "--matrix-out", d / "m.pbm", "--m0", 50) == 0
    assert len((d / "b.bin").read_bytes()) == 32
    assert run("decompress", "--bits", d / "b.bin", "--config", d / "ccfg", "--size", "32x32",
               "--out", d / "r.pbm") == 0
    assert (d / "r.pbm").read_bytes() == (d / "m.pbm").read_bytes()
    # module composition gives the same bits
    cfg = RunConfig.parse((d / "ccfg").read_text())
    gmap = grayness_from_image(bw, 1, mode="homogeneous",
                               contrast=analysis.contrast_limits(0.75).optimal_contrast)
    bits, _, _ = halftone_compress(cfg.codec(), gmap, cfg.ordering(32, 32),
                                   cfg.with_search(base_ensemble=50, max_ensemble=4096).search)
    assert np.packbits(bits).tobytes() == (d / "b.bin").read_bytes()


def test_analyze_capacity_and_pareto(capsys):
    assert run("analyze", "capacity", "--pf", 0.5) == 0
    header, row = capsys.readouterr().out.strip().splitlines()
    assert header == "p_f,kt_capacity,damaged_ecc_capacity,ratio"
    vals = [float(v) for v in row.split(",")]
    # PAPER: 1 - h(p_f/2) ~ 0.1887 and 2.65 times larger
    assert vals[:2] == [0.5, 0.5]
    assert vals[2] == pytest.approx(0.18872, abs=1e-5)
    assert vals[3] == pytest.approx(2.649, abs=1e-3)
    assert run("analyze", "pareto", "--pf", 0.46, "--f", 1, "--n", 2) == 0
    row = capsys.readouterr().out.strip().splitlines()[1]
    assert float(row.split(",")[2]) == pytest.approx(-0.4627, abs=1e-3)


def test_analyze_limits_and_profile(workdir, capsys):
    d = workdir
    assert run("analyze", "limits", "--rates", 0.5, 0.875, "--csv", d / "l.csv") == 0
    out = capsys.readouterr().out
    assert out == (d / "l.csv").read_text()
    assert len(out.strip().splitlines()) == 3
    assert run("analyze", "profile", "--image", d / "grad.pgm", "--config", d / "cfg") == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 64 * 64 // 8 + 1
    assert run("analyze", "pareto", "--pf", 0.7, "--f", 1, "--n", 2) == 1


def test_selftest(capsys):
    assert run("selftest") == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 5


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "halftree", "analyze", "capacity", "--pf", "0.25"],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.startswith("p_f,")


@given(st.integers(0, 2**64 - 1),
       st.sampled_from([BlockLayout(8, 7, 1, 0), BlockLayout(8, 6, 1, 1), BlockLayout(16, 8, 8, 0)]),
       st.one_of(st.none(), st.tuples(st.integers(0, 500), st.integers(0, 500))),
       st.sampled_from(["general", "homogeneous", "kt", "compress"]))
def test_config_round_trip(key, layout, shift, mode):
    cfg = RunConfig(key=key, layout=layout, shift=shift, mode=mode)
    line = cfg.format()
    assert "\n" not in line
    again = RunConfig.parse(line)
    assert again.format() == line
    assert (again.key, again.layout, again.shift, again.rotation) == (key, layout, shift, cfg.rotation)


@pytest.mark.parametrize("text", [
    "key=1 n=8 k=7 f=1 R=0 N=64 rot=13",
    "key=1 n=8 k=7 f=1 R=0 N=64 rot=13 shift=1;0",
    "key=1 n=8 k=7 f=1 R=0 N=64 rot=x shift=1,0",
    "key=1 n=8 k=7 f=1 R=0 N=64 rot=13 shift=1,0 color=red",
    "key=1 key=2 n=8 k=7 f=1 R=0 N=64 rot=13 shift=1,0",
    "key=11111111111111111 n=8 k=7 f=1 R=0 N=64 rot=13 shift=1,0",
])
def test_config_parse_errors(text):
    with pytest.raises(ParseError):
        RunConfig.parse(text)


def test_config_skips_comments_and_validates():
    cfg = RunConfig.parse("# shared secret\nkey=ff n=8 k=6 f=1 R=1 N=64 rot=13 shift=3,5 mode=kt\n")
    assert cfg.key == 255 and cfg.shift == (3, 5) and cfg.mode == "kt"
    with pytest.raises(BadParams):
        RunConfig.parse("key=1 n=8 k=7 f=1 R=1 N=64 rot=13 shift=1,0")
