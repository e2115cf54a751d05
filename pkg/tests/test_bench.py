import csv
import json

import numpy as np
import pytest

from pullback_ngd import bench, cli
from pullback_ngd.mps import TargetData


def write(tmp_path, text, name="cfg.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


RAYLEIGH50 = """
[benchmark]
problem = rayleigh
seed = 21
output_dir = out

[problem]
n = 50

[defaults]
max_iterations = 2000

[method:gd]
method = gd

[method:cg]
method = nonlinear_cg

[method:ngd]
method = ngd
metric = rayleigh_pullback
"""


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_rayleigh_run_ordering_and_outputs(tmp_path):
    cfg = bench.load_config(write(tmp_path, RAYLEIGH50))
    summary = bench.run_benchmark(cfg)
    out = tmp_path / "out"
    assert sorted(p.name for p in out.glob("*.csv")) == ["rayleigh__cg.csv", "rayleigh__gd.csv", "rayleigh__ngd.csv"]
    lam = bench.oracles.dense_symmetric_eigensolve(bench.rayleigh.RayleighInstance.random(50, 21).H)[0][0]
    assert summary["min_cost"] == pytest.approx(lam, rel=1e-12)
    to = {r["name"]: r["iterations_to"]["1e-10"] for r in summary["runs"]}
    assert to["ngd"] is not None
    assert all(to["ngd"] < (v if v is not None else np.inf) for k, v in to.items() if k != "ngd")

    rows = read_csv(out / "rayleigh__ngd.csv")
    assert tuple(rows[0]) == bench.CSV_HEADER
    assert rows[1][0] == "0" and rows[1][4] == ""
    its = [int(r[0]) for r in rows[1:]]
    assert its == list(range(len(its)))
    rel = [float(r[2]) for r in rows[1:]]
    assert all(e >= 0 for e in rel)
    assert all(b <= a for a, b in zip(rel, rel[1:]))

    resolved = json.loads((out / "resolved_config.json").read_text())
    assert resolved["methods"][2]["settings"]["cg_rel_tol"] == 1e-10
    assert "epsilon" in resolved["problem_info"]["ngd"]
    assert "to 1e-10" in (out / "summary.txt").read_text()


def test_spin_relative_error_populated(tmp_path):
    text = """
[benchmark]
problem = spin
seed = 2
output_dir = out
[problem]
width = 8
height = 8
[defaults]
max_iterations = 30
[method:gd]
method = gd
"""
    summary = bench.run_benchmark(bench.load_config(write(tmp_path, text)))
    assert summary["min_cost"] == -2.0
    rows = read_csv(tmp_path / "out" / "spin__gd.csv")
    for r in rows[1:]:
        assert float(r[2]) == pytest.approx(abs((float(r[1]) + 2) / 2), rel=1e-12)


def test_mps_relative_error_empty(tmp_path):
    text = """
[benchmark]
problem = mps_lsm
seed = 1
output_dir = out
[problem]
length = 4
bond_dim = 2
[defaults]
max_iterations = 3
[method:ngd]
method = ngd
metric = hilbert_hessian
"""
    bench.run_benchmark(bench.load_config(write(tmp_path, text)))
    rows = read_csv(tmp_path / "out" / "mps_lsm__ngd.csv")
    assert all(r[2] == "" for r in rows[1:])


@pytest.mark.parametrize("body,match", [
    ("[benchmark]\nproblem = rayleigh\n", "at least one method"),
    ("[benchmark]\nproblem = heat\n[method:a]\nmethod = gd\n", "problem must be"),
    ("[benchmark]\nproblem = rayleigh\n[method:a]\nmethod = ngd\nmetric = spin_pullback\n", "not available"),
    ("[benchmark]\nproblem = rayleigh\n[method:a]\nmethod = ngd\nmetric = bogus\n", "unknown metric"),
    ("[benchmark]\nproblem = rayleigh\n[method:a]\nmethod = ngd\n", "needs a metric"),
    ("[benchmark]\nproblem = rayleigh\n[method:a]\nmethod = gd\nmetric = fisher\n", "only meaningful"),
    ("[benchmark]\nproblem = rayleigh\n[problem]\nsize = 3\n[method:a]\nmethod = gd\n", "unknown key"),
    ("[benchmark]\nproblem = mps_lsm\n[problem]\nlength = 20\n[method:a]\nmethod = ngd\nmetric = hilbert_identity\n", "not available"),
    ("[benchmark]\nproblem = rayleigh\nseed = -1\n[method:a]\nmethod = gd\n", "64-bit"),
    ("[problem]\nn = 3\n", "missing"),
])
def test_config_errors(body, match):
    with pytest.raises(bench.ConfigError, match=match):
        bench.parse_config(body)


def test_defaults_and_overrides():
    cfg = bench.parse_config(
        "[benchmark]\nproblem = spin\n[defaults]\nmax_iterations = 7\n"
        "[method:a]\nmethod = gd\n[method:b]\nmethod = gd\nmax_iterations = 9\nnormalize_direction = no\n"
    )
    a, b = cfg.methods
    assert a.settings["max_iterations"] == 7 and b.settings["max_iterations"] == 9
    assert b.settings["normalize_direction"] is False
    assert cfg.problem_params["width"] == 32


def test_parallel_matches_serial(tmp_path):
    text = RAYLEIGH50.replace("max_iterations = 2000", "max_iterations = 40")
    cfg = bench.load_config(write(tmp_path, text))
    bench.run_benchmark(cfg)
    serial = {p.name: strip_timing(p.read_text()) for p in (tmp_path / "out").glob("*.csv")}
    cfg.jobs = 2
    cfg.output_dir = tmp_path / "par"
    bench.run_benchmark(cfg)
    par = {p.name: strip_timing(p.read_text()) for p in (tmp_path / "par").glob("*.csv")}
    assert serial == par


def strip_timing(text):
    return "\n".join(line.rsplit(",", 1)[0] for line in text.splitlines())


@pytest.mark.parametrize("name", ["rayleigh_verify.ini", "spin_verify.ini", "mps_verify.ini"])
def test_verify_configs_pass(name, configs_dir):
    results = bench.verify(bench.load_config(configs_dir / name))
    assert results and all(r.status == "pass" for r in results), [r.line() for r in results]


def test_verify_rayleigh_projection_tolerance(configs_dir):
    results = bench.verify(bench.load_config(configs_dir / "rayleigh_verify.ini"))
    proj = [r for r in results if "projection" in r.name]
    assert proj and proj[0].tol == 1e-8 and proj[0].defect <= 1e-8


def test_verify_skips_over_guard(tmp_path):
    text = "[benchmark]\nproblem = rayleigh\n[problem]\nn = 300\n[method:a]\nmethod = gd\n"
    results = bench.verify(bench.load_config(write(tmp_path, text)))
    assert any(r.status == "skip" for r in results)
    assert not any(r.status == "fail" for r in results)


def test_cli_generate_data_roundtrip(tmp_path, capsys):
    out = tmp_path / "t.txt"
    assert cli.main(["generate-data", "--length", "5", "--noise", "0", "--seed", "3", "--out", str(out)]) == 0
    data = TargetData.read(out)
    assert data.length == 5 and data.noise_amplitude == 0.0
    again = tmp_path / "u.txt"
    cli.main(["generate-data", "--length", "5", "--noise", "0", "--seed", "3", "--out", str(again)])
    assert out.read_bytes() == again.read_bytes()
    data.write(tmp_path / "v.txt")
    assert (tmp_path / "v.txt").read_bytes() == out.read_bytes()


def test_cli_data_file_ingest(tmp_path):
    cli.main(["generate-data", "--length", "4", "--noise", "0.1", "--seed", "3", "--out", str(tmp_path / "t.txt")])
    text = ("[benchmark]\nproblem = mps_lsm\noutput_dir = o\n[problem]\nlength = 4\nbond_dim = 2\n"
            "data_file = t.txt\n[defaults]\nmax_iterations = 2\n[method:a]\nmethod = gd\n")
    assert cli.main(["run", str(write(tmp_path, text))]) == 0
    bad = text.replace("length = 4", "length = 5")
    assert cli.main(["run", str(write(tmp_path, bad, "bad.ini"))]) != 0


def test_cli_errors_exit_nonzero(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "missing.ini")]) != 0
    assert "error" in capsys.readouterr().err
    assert cli.main(["generate-data", "--length", "20", "--out", str(tmp_path / "x")]) != 0
    with pytest.raises(SystemExit):
        cli.main(["frobnicate"])


def test_cli_run_and_verify(tmp_path, configs_dir, capsys):
    assert cli.main(["verify", str(configs_dir / "spin_verify.ini")]) == 0
    assert "PASS" in capsys.readouterr().out
    cfg = write(tmp_path, RAYLEIGH50.replace("max_iterations = 2000", "max_iterations = 5"))
    assert cli.main(["run", str(cfg), "--output-dir", str(tmp_path / "o2")]) == 0
    assert (tmp_path / "o2" / "summary.json").exists()
