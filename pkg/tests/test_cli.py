import csv
import filecmp
import io
import subprocess
import sys

import numpy as np
import pytest

from sfhelab.cli import main
from sfhelab.sampler import read_binary

CFG = """[model]
alpha = 1.5
hurst = 0.4
[experiment]
kind = supGrowthL
L = 1, 4, 16
replicates = 24
bootstrap = 20
resolution = skip
seed = 17
"""


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_moments(capsys):
    assert main(["moments", "--alpha", "1.5", "--hurst", "0.4", "--t", "1", "--L", "4"]) == 0
    got = {k: float(v) for k, v in rows(capsys.readouterr().out)[1:]}
    assert got["c1H"] == pytest.approx(0.1409792265, rel=1e-9)
    assert got["c21"] == pytest.approx(0.6284613, rel=1e-6)
    assert got["variance"] == pytest.approx(got["c21"])
    assert got["psi"] == pytest.approx(1 + np.sqrt(np.log2(4.0)))


def test_global_flags_either_side(capsys):
    assert main(["--seed", "3", "moments", "--alpha", "1.5", "--hurst", "0.4"]) == 0
    assert main(["moments", "--alpha", "1.5", "--hurst", "0.4", "--seed", "3"]) == 0


@pytest.mark.parametrize("argv", [
    ["moments", "--alpha", "1.5", "--hurst", "0.4", "--bogus"],
    ["frobnicate"],
    [],
    ["metrics", "--alpha", "1.5", "--hurst", "0.4", "--t", "1"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["moments", "--alpha", "2.5", "--hurst", "0.4"],
    ["moments", "--alpha", "1.5", "--hurst", "0.4", "--seed", "-4"],
    ["metrics", "--alpha", "1.5", "--hurst", "0.4", "--kind", "d2", "--t", "1"],
    ["sample", "--alpha", "1.5", "--hurst", "0.4", "--format", "binary"],
    ["sample", "--alpha", "1.5", "--hurst", "0.4", "--nx", "0"],
    ["experiment", "run", "/nonexistent/config.ini"],
    ["experiment", "report", "/nonexistent"],
])
def test_config_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "configuration error" in capsys.readouterr().err


def test_numerical_contract_exit_3(capsys):
    argv = ["bounds", "--alpha", "1.5", "--hurst", "0.4", "--L", "16", "--law", "d2", "--h", "0.01",
            "--theta", "0.15"]
    assert main(argv) == 3
    assert "numerical contract" in capsys.readouterr().err


def test_metrics_and_bounds(capsys):
    assert main(["metrics", "--alpha", "1.5", "--hurst", "0.4", "--kind", "d1", "--t", "1", "--y", "1"]) == 0
    (kind, value, err), = rows(capsys.readouterr().out)[1:]
    assert kind == "d1" and float(value) > 0 and 0 <= float(err) <= 1e-8 * float(value)
    assert main(["bounds", "--alpha", "1.5", "--hurst", "0.4", "--L", "1024"]) == 0
    out = {r[0]: r for r in rows(capsys.readouterr().out)[1:]}
    assert int(out["sudakov"][1]) == 2049
    assert float(out["sudakov"][2]) == pytest.approx(1.0239907681, rel=1e-9)


def test_sample_csv_and_binary(tmp_path, capsys):
    base = ["--seed", "5", "sample", "--alpha", "1.5", "--hurst", "0.4", "--nx", "16", "--dx", "0.5"]
    assert main(base) == 0
    text = capsys.readouterr().out
    assert main(base) == 0
    assert capsys.readouterr().out == text
    assert main(base + ["--format", "binary", "--out", str(tmp_path / "f.bin"), "--replicates", "2"]) == 0
    (a, seed_a), (b, _) = read_binary(tmp_path / "f_0000.bin"), read_binary(tmp_path / "f_0001.bin")
    assert a.shape == (1, 16) and seed_a == 5 and not np.array_equal(a, b)
    assert main(base + ["--method", "cholesky", "--out", str(tmp_path / "c.csv")]) == 0


def test_experiment_run_is_byte_identical(tmp_path, capsys):
    conf = tmp_path / "c.ini"
    conf.write_text(CFG, encoding="utf-8")
    for name, threads in (("a", "1"), ("b", "4")):
        assert main(["experiment", "run", str(conf), "--out", str(tmp_path / name), "--threads", threads]) == 0
    for f in ("results.csv", "summary.csv", "plot.csv"):
        assert filecmp.cmp(tmp_path / "a" / f, tmp_path / "b" / f, shallow=False)
    capsys.readouterr()
    assert main(["experiment", "report", str(tmp_path / "a")]) == 0
    summary = dict(rows(capsys.readouterr().out)[1:])
    assert summary["kind"] == "supGrowthL" and summary["seed"] == "17"
    # a different seed changes the output
    assert main(["--seed", "18", "experiment", "run", str(conf), "--out", str(tmp_path / "c")]) == 0
    assert not filecmp.cmp(tmp_path / "a" / "results.csv", tmp_path / "c" / "results.csv", shallow=False)


def test_experiment_needs_output(tmp_path, capsys):
    conf = tmp_path / "c.ini"
    conf.write_text(CFG, encoding="utf-8")
    assert main(["experiment", "run", str(conf)]) == 2


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "sfhelab", "moments", "--alpha", "1.5", "--hurst", "0.4"],
                         capture_output=True, text=True, check=True).stdout
    assert out.splitlines()[0] == "name,value"
