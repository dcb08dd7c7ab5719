import json
import os

import numpy as np
import pytest

from srblab import cli, io
from srblab.dynamics import E_U

SMALL = {
    "analyze-orbit": ["--horizon", "500"],
    "hyperbolic-times": ["--horizon", "500"],
    "grow-manifold": ["--depth", "300"],
    "estimate-srb": ["--depth", "300", "--particles", "2000", "--generations", "12", "--cap", "1000"],
}
READERS = {
    "report.txt": io.read_kv, "theta.txt": io.read_kv, "summary.txt": io.read_kv, "tau_stats.txt": io.read_kv,
    "distortion.txt": io.read_kv, "manifest.txt": io.read_kv, "acceptance.txt": io.read_table,
    "tags.txt": io.read_table, "qualifying.txt": io.read_table, "pliss_times.txt": io.read_table,
    "truncations.txt": io.read_table, "i_of_n.txt": io.read_table, "patch.txt": io.read_patch,
    "measure.txt": io.read_measure, "histogram.txt": io.read_matrix, "histogram_mu.txt": io.read_matrix,
}


def run(args, out):
    return cli.run(args + ["--out", str(out)])


def error_line(err):
    lines = [ln for ln in err.strip().splitlines() if ln.startswith("{")]
    assert len(lines) == 1
    return json.loads(lines[0])


@pytest.mark.parametrize("cmd", sorted(SMALL))
def test_commands_emit_parseable_outputs(cmd, tmp_path):
    assert run([cmd, "--seed", "1"] + SMALL[cmd], tmp_path) == 0
    man = io.read_kv(tmp_path / "manifest.txt")
    assert man["exit_code"] == 0 and man["command"] == cmd and man["seed"] == 1
    assert len(man["config_sha256"]) == 64 and man["constants"]["lambda1"] > 2.6
    cfg = (tmp_path / "config.json").read_text()
    assert io.sha256_text(cfg) == man["config_sha256"]
    for name in man["outputs"]:
        READERS[name](tmp_path / name)


@pytest.mark.parametrize("cmd", sorted(SMALL))
def test_same_seed_byte_identical(cmd, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run([cmd, "--seed", "3"] + SMALL[cmd], a) == 0
    assert run([cmd, "--seed", "3"] + SMALL[cmd], b) == 0
    outs = io.read_kv(a / "manifest.txt")["outputs"]
    assert outs
    for name in outs + ["config.json"]:
        if name != "config.json":
            assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_config_file_and_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 4, "budgets": {"horizon": 300}, "point": [0.41, 0.17]}))
    assert cli.run(["hyperbolic-times", "--config", str(cfg), "--horizon", "400", "--out", str(tmp_path / "o")]) == 0
    man = io.read_kv(tmp_path / "o" / "manifest.txt")
    assert man["seed"] == 4
    assert io.read_kv(tmp_path / "o" / "theta.txt")["horizon"] == 400


def test_unknown_subcommand(tmp_path, capsys):
    assert cli.run(["frobnicate"]) == 2
    err = capsys.readouterr().err
    assert "usage:" in err
    assert error_line(err)["exit_code"] == 2


def test_missing_subcommand(capsys):
    assert cli.run([]) == 2
    assert "usage:" in capsys.readouterr().err


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.run(["analyze-orbit", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert error_line(capsys.readouterr().err)["kind"] == "config"
    assert run(["analyze-orbit", "--horizon", "5"], tmp_path / "o2") == 2
    assert io.read_kv(tmp_path / "o2" / "manifest.txt")["exit_code"] == 2
    # a point in the neutral disk is outside the manifold-growth precondition
    assert run(["grow-manifold", "--point", "0.01", "0.0", "--depth", "100"], tmp_path / "o3") == 2


def test_io_errors(tmp_path, capsys):
    assert cli.run(["analyze-orbit", "--config", str(tmp_path / "missing.json")]) == 4
    assert error_line(capsys.readouterr().err)["kind"] == "io"
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run(["analyze-orbit", "--horizon", "200"], blocker / "sub") == 4


def test_numerical_error(tmp_path, capsys):
    p = (0.06 * E_U) % 1.0
    code = run(["grow-manifold", "--point", repr(float(p[0])), repr(float(p[1])), "--depth", "1000"], tmp_path)
    assert code == 3
    rec = error_line(capsys.readouterr().err)
    assert rec["error"] == "ManifoldCollapse" and rec["exit_code"] == 3
    assert io.read_kv(tmp_path / "manifest.txt")["status"] == "numerical"


def test_validate_linear_full_table(tmp_path, capsys):
    assert run(["validate", "--model", "linear_cat"], tmp_path) == 0
    header, rows = io.read_table(tmp_path / "acceptance.txt")
    assert header[:2] == ["criterion", "status"]
    assert [r[0] for r in rows] == list(range(1, 10))
    assert [r[1] for r in rows] == ["PASS", "PASS"] + ["SKIP"] * 7
    assert "criterion 1" in capsys.readouterr().out.lower()


def test_estimate_srb_full_budget(tmp_path):
    args = ["estimate-srb", "--model", "neutral_cat", "--particles", "100000", "--generations", "50",
            "--depth", "1000"]
    assert run(args, tmp_path) == 0
    h = io.read_matrix(tmp_path / "histogram.txt")
    assert h.shape == (32, 32) and abs(h.sum() - 1) < 1e-9
    st = io.read_kv(tmp_path / "tau_stats.txt")
    assert st["n"] >= 10**5 and st["integrable_verdict"] is True
    d = io.read_kv(tmp_path / "distortion.txt")
    assert d["max_log_ratio"] <= d["bound"]
    m = io.read_measure(tmp_path / "measure.txt")
    assert len(m) > 0 and np.all(m.weights > 0)
