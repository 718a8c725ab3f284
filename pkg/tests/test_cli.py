import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from heatqc import cli
from heatqc.errors import ConfigError, NonQuasiconformalSample


def _run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = cli.run([*args, "--out", str(out)])
    return code, out


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_selfcheck(tmp_path, capsys):
    code, out = _run(tmp_path, "selfcheck")
    assert code == 0
    text = capsys.readouterr().out
    assert "FAIL" not in text and "eta identity" in text
    checks = json.loads((out / "selfcheck.json").read_text())
    assert all(c["passed"] for c in checks)
    m = json.loads((out / "manifest.json").read_text())
    assert m["exit_code"] == 0 and m["outputs"] == ["selfcheck.json"] and m["wall_time_s"] > 0
    assert {"heatqc", "numpy", "scipy", "python"} <= set(m["versions"])


def test_extend_unit_identity(tmp_path):
    code, out = _run(tmp_path, "extend", "--weight", "unit", "--x", "-1:1:21", "--t", "0.1:10:log:11")
    assert code == 0
    rows = _rows(out / "extension.csv")
    assert list(rows[0]) == list(cli.EXTEND_COLUMNS)
    assert len(rows) == 231
    assert max(float(r["abs_mu"]) for r in rows) < 1e-9
    for r in rows:
        assert float(r["U"]) == pytest.approx(float(r["x"]), abs=1e-9)
        assert float(r["V"]) == pytest.approx(float(r["t"]), abs=1e-9)


def test_extend_deterministic(tmp_path):
    args = ("extend", "--weight", "expsine", "--x", "-2:2:9", "--t", "0.01:1:log:5", "--seed", "3")
    c1, o1 = _run(tmp_path, *args, name="a")
    c2, o2 = _run(tmp_path, *args, name="b")
    assert c1 == c2 == 0
    assert (o1 / "extension.csv").read_bytes() == (o2 / "extension.csv").read_bytes()


def test_csv_round_trip_digits(tmp_path):
    _, out = _run(tmp_path, "extend", "--weight", "sqrt", "--x", "0.3", "--t", "0.7")
    from heatqc.extension import beltrami_arrays
    from heatqc.weights import lookup

    a = beltrami_arrays(lookup("sqrt"), [0.3], [0.7])
    row = _rows(out / "extension.csv")[0]
    assert float(row["K"]) == a["K"][0] and float(row["J"]) == a["J"][0]


@pytest.mark.parametrize("args", [
    ("extend", "--weight", "nosuch"),
    ("extend", "--x", "1:0"),
    ("extend", "--t", "-1:1:5"),
    ("extend", "--x", "a:b:c"),
    ("scan", "--inner", "4:4"),
    ("vanish", "--t", "0.1,1"),
    ("bogus",),
    ("extend", "--rel-tol", "0"),
    ("analyze", "--scales", "0.1,1"),
])
def test_config_errors_exit_1(tmp_path, args):
    code, _ = _run(tmp_path, *args)
    assert code == 1


def test_config_file_and_precedence(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# sweep\nweight = sqrt\nx = 0:1:3\nt = 0.5,1\n")
    code, out = _run(tmp_path, "extend", "--config", str(conf))
    assert code == 0
    rows = _rows(out / "extension.csv")
    assert len(rows) == 6 and rows[0]["x"] == "0"
    code, out = _run(tmp_path, "extend", "--config", str(conf), "--x", "2", name="o2")
    assert code == 0 and {r["x"] for r in _rows(out / "extension.csv")} == {"2"}
    assert json.loads((out / "manifest.json").read_text())["config"]["weight"] == "sqrt"


def test_config_unknown_key(tmp_path):
    conf = tmp_path / "bad.conf"
    conf.write_text("wieght = sqrt\n")
    assert _run(tmp_path, "extend", "--config", str(conf))[0] == 1
    conf.write_text("no equals sign here\n")
    assert _run(tmp_path, "extend", "--config", str(conf))[0] == 1
    assert _run(tmp_path, "extend", "--config", str(tmp_path / "missing.conf"))[0] == 1


def test_numeric_failure_exit_2(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise NonQuasiconformalSample("J=-1", {"J": -1.0})

    monkeypatch.setattr("heatqc.extension.beltrami_arrays", boom)
    code, out = _run(tmp_path, "extend")
    assert code == 2
    m = json.loads((out / "manifest.json").read_text())
    assert m["exit_code"] == 2 and "NonQuasiconformalSample" in m["error"]


def test_parse_grid():
    np.testing.assert_allclose(cli.parse_grid("0:1:5"), [0, 0.25, 0.5, 0.75, 1])
    np.testing.assert_allclose(cli.parse_grid("1:100:log:3"), [1, 10, 100])
    assert list(cli.parse_grid("3,1,2")) == [3.0, 1.0, 2.0]
    for bad in ("", "1:2:0", "0:1:log:3", "x"):
        with pytest.raises(ConfigError):
            cli.parse_grid(bad, positive=bad.startswith("0:1:log"))


def test_vanish_small(tmp_path):
    code, out = _run(tmp_path, "vanish", "--weight", "expsine", "--x0", "0:3:3", "--t", "1,0.1", "--inner", "16:16")
    assert code == 0
    rows = _rows(out / "vanish.csv")
    assert [float(r["t"]) for r in rows] == [1.0, 0.1]
    assert float(rows[0]["sup_A"]) > float(rows[1]["sup_A"]) > 0
    assert len(_rows(out / "boxes.csv")) == 6


def test_scan_small(tmp_path):
    code, out = _run(tmp_path, "scan", "--weight", "unit", "--x0", "-1:1:4", "--t", "0.1:1:log:4",
                     "--inner", "8:8", "--rounds", "1")
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["sup_estimate"] < 1e-25 and len(rep["boxes"]) == 16


def test_analyze_table_and_json(tmp_path, capsys):
    args = ("analyze", "--weight", "sqrt", "--scales", "1,0.01", "--samples", "8")
    code, out = _run(tmp_path, *args)
    assert code == 0
    doc = json.loads((out / "analysis.json").read_text())
    assert doc["ainfty_ratio_sup"] >= 1.0
    assert "delta" in capsys.readouterr().out
    _, out2 = _run(tmp_path, *args, name="again")
    assert (out / "oscillation.csv").read_bytes() == (out2 / "oscillation.csv").read_bytes()
    assert (out / "analysis.json").read_bytes() == (out2 / "analysis.json").read_bytes()


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "heatqc.cli", "extend", "--x", "0", "--t", "1",
                        "--out", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    r = subprocess.run([sys.executable, "-m", "heatqc.cli", "extend", "--weight", "zzz", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 1 and "error" in r.stderr
