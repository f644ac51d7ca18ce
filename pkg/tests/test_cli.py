import json
import subprocess
import sys

import numpy as np
import pytest

from tunnelsplit.cli import main


def run_cli(args):
    proc = subprocess.run([sys.executable, "-m", "tunnelsplit.cli", *args],
                          capture_output=True, text=True)
    return proc.returncode, proc.stdout, proc.stderr


def test_spectrum_free_rotor(capsys):
    assert main(["spectrum", "--system", "free", "--hbar", "1", "--emax", "3"]) == 0
    out = capsys.readouterr().out
    lines = [l for l in out.splitlines() if l and not l.startswith("#")]
    header, rows = lines[0], lines[1:]
    assert header.split(",") == ["index", "energy", "delta_eps", "eta",
                                 "p2_expectation", "sector"]
    energies = [float(r.split(",")[1]) for r in rows]
    assert energies[:5] == pytest.approx([0.0, 0.5, 0.5, 2.0, 2.0])


def test_spectrum_h1_level_count(capsys):
    assert main(["spectrum", "--system", "H1", "--hbar", "0.02", "--emax", "3"]) == 0
    out = capsys.readouterr().out
    n = len([l for l in out.splitlines() if l and not l.startswith("#")]) - 1
    assert 200 <= n <= 400


def test_invalid_parameter_exits_2():
    code, out, err = run_cli(["spectrum", "--system", "H1", "--hbar", "-1",
                              "--emax", "3"])
    assert code == 2
    doc = json.loads(err.strip())
    assert doc["error"] == "ConfigError"
    assert "range" in doc["message"]


def test_unknown_system_exits_2(capsys):
    assert main(["spectrum", "--system", "zzz", "--hbar", "0.1", "--emax", "1"]) == 2


def test_pairs_csv_schema(capsys):
    assert main(["pairs", "--system", "ex2.2", "--hbar", "0.04", "--k", "1",
                 "--emin", "1.5", "--emax", "2.0"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# schema: tunnelsplit/levels v1\n")
    lines = [l for l in out.splitlines() if l and not l.startswith("#")]
    assert lines[0].split(",")[:4] == ["index", "energy", "delta_eps", "eta"]
    assert len(lines) > 5


def test_byte_identical_reruns():
    args = ["compare", "--system", "ex2.2", "--hbar", "0.04", "--k", "1",
            "--emin", "1.6", "--emax", "2.0"]
    _, out1, _ = run_cli(args)
    _, out2, _ = run_cli(args)
    assert out1 == out2 and out1


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("system = free\nhbar = 1.0\nemax = 3\n")
    assert main(["spectrum", "--config", str(cfg)]) == 0
    base = capsys.readouterr().out
    assert main(["spectrum", "--config", str(cfg), "--emax", "1"]) == 0
    override = capsys.readouterr().out
    assert len(override.splitlines()) < len(base.splitlines())


def test_out_writes_data_and_sidecar(tmp_path):
    out = tmp_path / "pairs.csv"
    code, _, _ = run_cli(["pairs", "--system", "free", "--hbar", "1",
                          "--emax", "4", "--out", str(out)])
    assert code == 0
    assert out.exists()
    meta = json.loads((tmp_path / "pairs.csv.meta.json").read_text())
    assert meta["config"]["system"] == "free"
    assert "written_at" in meta


def test_wsum_json(capsys):
    assert main(["wsum", "--k", "2", "--x", "1", "--y", "0",
                 "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["rows"][0]["re"] == pytest.approx(1.0 / (4 * np.sin(0.5) ** 2))


def test_wsum_divergent_exits_1(capsys):
    assert main(["wsum", "--k", "2", "--x", "0", "--y", "0"]) == 1
    err = capsys.readouterr().err
    assert json.loads(err)["error"] == "DivergentSumError"


def test_catalog_list_and_describe(capsys):
    assert main(["catalog", "list"]) == 0
    out = capsys.readouterr().out
    assert "ex3.3" in out
    assert main(["catalog", "describe", "H4"]) == 0
    out = capsys.readouterr().out
    assert "p-line locus" in out and "x-line locus" in out


def test_compare_ex32_half_offset(capsys):
    assert main(["compare", "--system", "ex3.2", "--hbar", "0.02",
                 "--pc-over-hbar", "0.5", "--emin", "0.1", "--emax", "0.9"]) == 0
    out = capsys.readouterr().out
    rows = [l.split(",") for l in out.splitlines()[2:] if l]
    assert rows
    for r in rows:
        assert float(r[1]) < 1e-10          # delta_num
        assert float(r[2]) == 0.0           # delta_pred is exactly zero


def test_predict_single_energy(capsys):
    assert main(["predict", "--system", "H2", "--hbar", "0.05",
                 "--eps", "2.0"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["eta"] > 0
    assert len(doc["paths"]) == 2


def test_scan_lambda_includes_degenerate_row(capsys):
    assert main(["scan", "--system", "H2", "--hbar", "0.05", "--axis", "lambda",
                 "--grid", "0,0.5", "--eps-ref", "2.0"]) == 0
    out = capsys.readouterr().out
    lines = [l for l in out.splitlines() if l and not l.startswith("#")]
    first = dict(zip(lines[0].split(","), lines[1].split(",")))
    assert float(first["amp_pred"]) == 0.0
    assert abs(float(first["delta_num"])) < 1e-12


def test_scan_grid_too_small_for_slope(capsys):
    assert main(["scan", "--system", "ex2.2", "--k", "1", "--axis", "hbar",
                 "--grid", "0.08,0.04", "--eps-ref", "2.0",
                 "--envelope-samples", "4"]) == 0
    out = capsys.readouterr().out
    lines = [l for l in out.splitlines() if l and not l.startswith("#")]
    assert lines[1].split(",")[-1] == ""     # no slope from two points
