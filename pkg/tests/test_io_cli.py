import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from gradpapa import io
from gradpapa.cli import main
from gradpapa.solver import TRACE_COLUMNS


def cli(*argv):
    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:  # argparse usage errors
        return exc.code


# ---------- containers ----------

def test_cube_round_trip_bit_exact(tmp_path):
    Y = np.random.default_rng(0).standard_normal((7, 12))
    Y[0, 0] = -0.0
    Y[1, 1] = 5e-324
    io.write_cube(tmp_path / "a.ll1c", Y, (3, 4))
    Z, shape = io.read_cube(tmp_path / "a.ll1c")
    assert shape == (3, 4)
    assert Z.tobytes() == Y.tobytes()


def test_cube_layout_is_little_endian_row_major(tmp_path):
    Y = np.arange(6.0).reshape(2, 3)
    io.write_cube(tmp_path / "c.ll1c", Y, (3, 1))
    raw = (tmp_path / "c.ll1c").read_bytes()
    assert raw[:4] == b"LL1C"
    assert np.frombuffer(raw[-48:], "<f8").tolist() == [0, 1, 2, 3, 4, 5]
    assert int.from_bytes(raw[8:16], "little") == 3


def test_factor_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    C, S = rng.random((5, 3)), rng.random((3, 20))
    io.write_factor(tmp_path / "C.ll1f", C, io.ENDMEMBERS)
    io.write_factor(tmp_path / "S.ll1f", S, io.ABUNDANCES, (4, 5))
    C2, kc, _ = io.read_factor(tmp_path / "C.ll1f")
    S2, ks, shape = io.read_factor(tmp_path / "S.ll1f")
    assert (kc, ks, shape) == (io.ENDMEMBERS, io.ABUNDANCES, (4, 5))
    assert C2.tobytes() == C.tobytes() and S2.tobytes() == S.tobytes()


@pytest.mark.parametrize("payload", [b"", b"XXXX" + bytes(40), b"LL1C" + bytes(10)])
def test_malformed_cube(tmp_path, payload):
    (tmp_path / "bad.ll1c").write_bytes(payload)
    with pytest.raises(io.FileFormatError):
        io.read_cube(tmp_path / "bad.ll1c")


def test_truncated_payload(tmp_path):
    io.write_cube(tmp_path / "t.ll1c", np.ones((2, 4)), (2, 2))
    raw = (tmp_path / "t.ll1c").read_bytes()
    (tmp_path / "t.ll1c").write_bytes(raw[:-8])
    with pytest.raises(io.FileFormatError):
        io.read_cube(tmp_path / "t.ll1c")


def test_atomic_write_leaves_no_partial_file(tmp_path):
    target = tmp_path / "x.bin"
    with pytest.raises(RuntimeError):
        with io.atomic_write(target) as fh:
            fh.write(b"half")
            raise RuntimeError
    assert list(tmp_path.iterdir()) == []


def test_config_defaults_and_unknown_keys(tmp_path):
    cfg = io.load_config({})
    assert cfg == io.CONFIG_DEFAULTS
    with pytest.raises(ValueError):
        io.load_config({"mode": "lr", "step": 3})
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"mode": "nn", "theta": 0.01}))
    assert io.load_config(path)["mode"] == "nn"


# ---------- CLI ----------

@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "truth"
    assert cli("synth", "--i", 12, "--j", 10, "--k", 8, "--l", 3, "--r", 3,
               "--snr", 30, "--seed", 4, "--out", out) == 0
    return out


def test_synth_outputs_round_trip(synth_dir):
    from gradpapa.datagen import add_noise, generate_synthetic

    C, S, Y = generate_synthetic(12, 10, 8, 3, 3, seed=4)
    C2, _, _ = io.read_factor(synth_dir / "C.ll1f")
    S2, _, shape = io.read_factor(synth_dir / "S.ll1f")
    Y2, _ = io.read_cube(synth_dir / "cube_clean.ll1c")
    assert shape == (12, 10)
    assert np.array_equal(C, C2) and np.array_equal(S, S2) and np.array_equal(Y, Y2)
    Yn, _ = io.read_cube(synth_dir / "cube_noisy.ll1c")
    manifest = json.loads((synth_dir / "manifest.json").read_text())
    assert manifest["snr"] == 30
    assert not np.array_equal(Yn, Y)


def test_synth_without_snr(tmp_path):
    assert cli("synth", "--i", 6, "--j", 6, "--k", 4, "--l", 2, "--r", 2, "--out", tmp_path) == 0
    assert json.loads((tmp_path / "manifest.json").read_text())["snr"] is None
    assert not (tmp_path / "cube_noisy.ll1c").exists()


def test_synth_invalid_dims(tmp_path):
    assert cli("synth", "--i", 6, "--j", 6, "--k", 4, "--l", 7, "--r", 2, "--out", tmp_path) == 2


def test_decompose_fixed_point(synth_dir, tmp_path):
    out = tmp_path / "fp"
    code = cli("decompose", "--input", synth_dir / "cube_clean.ll1c", "--r", 3, "--mode", "nn",
               "--init-c", synth_dir / "C.ll1f", "--init-s", synth_dir / "S.ll1f", "--out", out)
    assert code == 0
    res = json.loads((out / "result.json").read_text())
    assert res["iterations"] <= 2
    assert res["final_objective"] <= 1e-20


def test_decompose_trace_and_eval(synth_dir, tmp_path, capsys):
    out = tmp_path / "est"
    code = cli("decompose", "--input", synth_dir / "cube_noisy.ll1c", "--r", 3, "--mode", "lr",
               "--l", 3, "--max-iters", 60, "--out", out)
    assert code == 0
    res = json.loads((out / "result.json").read_text())
    with open(out / "trace.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(TRACE_COLUMNS)
    assert len(rows) - 1 == res["iterations"]
    assert [int(r[0]) for r in rows[1:]] == list(range(1, res["iterations"] + 1))

    capsys.readouterr()
    assert cli("eval", "--est", out, "--truth", synth_dir) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["sto_percent"] == 100.0
    assert rep["l"] == 3
    assert 0 <= rep["mse_c"] < 0.05


def test_eval_self_and_permuted(synth_dir, tmp_path, capsys):
    capsys.readouterr()
    assert cli("eval", "--est", synth_dir, "--truth", synth_dir) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["mse_c"] == pytest.approx(0, abs=1e-15) and rep["mse_s"] == pytest.approx(0, abs=1e-15)
    assert rep["sto_percent"] == 100.0

    C, _, _ = io.read_factor(synth_dir / "C.ll1f")
    S, _, shape = io.read_factor(synth_dir / "S.ll1f")
    perm = [2, 0, 1]
    io.write_factor(tmp_path / "C.ll1f", C[:, perm], io.ENDMEMBERS)
    io.write_factor(tmp_path / "S.ll1f", S[perm], io.ABUNDANCES, shape)
    assert cli("eval", "--est", tmp_path, "--truth", synth_dir) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["mse_c"] == pytest.approx(0, abs=1e-15)
    assert rep["matching_c"] == [1, 2, 0]
    assert rep["matching_s"] == [1, 2, 0]


@pytest.mark.parametrize("l, code", [(25, 0), (30, 1), (101, 2)])
def test_check_exit_codes(l, code, capsys):
    assert cli("check", "--i", 100, "--j", 100, "--k", 100, "--l", l, "--r", 5) == code


def test_usage_errors(tmp_path, synth_dir):
    assert cli("decompose", "--input", tmp_path / "missing.ll1c", "--r", 2, "--out", tmp_path) == 2
    (tmp_path / "junk.ll1c").write_bytes(b"nonsense")
    assert cli("decompose", "--input", tmp_path / "junk.ll1c", "--r", 2, "--out", tmp_path) == 2
    (tmp_path / "cfg.json").write_text('{"bogus": 1}')
    assert cli("decompose", "--input", synth_dir / "cube_clean.ll1c", "--config",
               tmp_path / "cfg.json", "--r", 2, "--out", tmp_path) == 2
    assert cli("decompose", "--input", synth_dir / "cube_clean.ll1c", "--mode", "lr",
               "--r", 2, "--out", tmp_path) == 2
    assert cli("frobnicate") == 2


def test_numerical_abort_exit_code(tmp_path):
    Y = np.abs(np.random.default_rng(2).standard_normal((4, 16))) * 1e300
    io.write_cube(tmp_path / "huge.ll1c", Y, (4, 4))
    out = tmp_path / "o"
    code = cli("decompose", "--input", tmp_path / "huge.ll1c", "--r", 2, "--mode", "lr",
               "--l", 2, "--init", "random", "--out", out)
    assert code == 3
    res = json.loads((out / "result.json").read_text())
    assert res["termination"] == "numerical"


def test_default_output_dir_from_env(tmp_path, monkeypatch):
    monkeypatch.setenv("GRADPAPA_OUT_DIR", str(tmp_path / "envout"))
    assert cli("synth", "--i", 5, "--j", 5, "--k", 3, "--l", 2, "--r", 2) == 0
    assert (tmp_path / "envout" / "C.ll1f").exists()


def _run_module(*argv):
    return subprocess.run([sys.executable, "-m", "gradpapa.cli", *map(str, argv)],
                          capture_output=True, text=True, check=False)


def test_factor_files_are_reproducible(synth_dir, tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        proc = _run_module("decompose", "--input", synth_dir / "cube_noisy.ll1c", "--r", 3,
                           "--mode", "nn", "--theta", 1e-3, "--init", "random", "--seed", 9,
                           "--max-iters", 40, "--out", out)
        assert proc.returncode == 0, proc.stderr
        outs.append(out)
    for f in ("C.ll1f", "S.ll1f"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
    strip = lambda p: [r[:1] + r[2:] for r in csv.reader(open(p / "trace.csv", newline=""))]
    assert strip(outs[0]) == strip(outs[1])
