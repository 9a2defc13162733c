import csv
import json

import numpy as np
import pytest

from jjcircuit.cli import main
from jjcircuit.config import ConfigError, SweepSpec, load_config
from jjcircuit.sweep import run_sweep

from conftest import DATA, RF_SQUID, TRANSMON_PAIR

PAIR_CONFIG = """
netlist: pair.net
truncations: {J0: 6, J1: 6}
partition:
  name: root
  children:
    - {name: A, children: [J0], keep: 2, excite: 11}
    - {name: B, children: [J1], keep: 2, excite: 11}
sweep: {param: "qoff:1", start: 0.0, stop: 0.5, steps: 3}
output: {levels: 3, observables: ["charge:J0"]}
method: hier+pt
"""


@pytest.fixture
def pair(tmp_path):
    (tmp_path / "pair.net").write_text(TRANSMON_PAIR)
    cfg = tmp_path / "pair.yaml"
    cfg.write_text(PAIR_CONFIG)
    return cfg


def _csv_rows(text):
    reader = csv.DictReader(ln for ln in text.splitlines() if not ln.startswith("#"))
    return reader.fieldnames, list(reader)


def test_missing_inputs_exit_code(capsys):
    assert main([]) == 2


def test_bad_netlist_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.net"
    bad.write_text("cap C 1 0 -3\n")
    assert main(["--netlist", str(bad)]) == 1
    assert "negative capacitance" in capsys.readouterr().err


def test_brute_netlist_only(tmp_path):
    net = tmp_path / "rf.net"
    net.write_text(RF_SQUID)
    out = tmp_path / "out.csv"
    assert main(["--netlist", str(net), "--levels", "3", "--out", str(out)]) == 0
    text = out.read_text()
    assert text.startswith("# jjcircuit sweep schema 1")
    header, rows = _csv_rows(text)
    assert header[:6] == ["index", "param", "value", "E0", "E1", "E2"]
    assert float(rows[0]["E0"]) == 0.0 and float(rows[0]["E1"]) > 0


def test_dump_topology(pair, capsys):
    assert main(["--config", str(pair), "--dump-topology"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert sorted(data["tree_branches"]) == ["J1", "J2"]


def test_dump_terms(pair, capsys):
    assert main(["--config", str(pair), "--dump-terms"]) == 0
    labels = {t["label"] for t in json.loads(capsys.readouterr().out)}
    assert {"C:J0", "C:J1", "C:J0,J1", "J:J1", "J:J2*"} <= labels


def test_hier_pt_sweep_with_report(pair, tmp_path, capsys):
    report = tmp_path / "report.json"
    assert main(["--config", str(pair), "--corrections-report", str(report)]) == 0
    header, rows = _csv_rows(capsys.readouterr().out)
    assert [r["param"] for r in rows] == ["qoff:1"] * 3
    assert "Q_J0[0]" in header
    data = json.loads(report.read_text())
    assert len(data) == 3
    assert "Ud[Q_J0;Q_J1]" in data[0]["report"]["channels"]


def test_methods_agree_closely(pair):
    cfg = load_config(pair)
    brute = run_sweep(cfg, "brute")
    pt = run_sweep(cfg, "hier+pt")
    hier = run_sweep(cfg, "hier")
    for b, p, h in zip(brute, pt, hier):
        err_pt = np.abs(b.energies - p.energies).max()
        err_h = np.abs(b.energies - h.energies).max()
        assert err_pt < err_h / 20


def test_threads_do_not_change_results(pair):
    cfg = load_config(pair)
    a = run_sweep(cfg, "brute", threads=1)
    b = run_sweep(cfg, "brute", threads=3)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x.energies, y.energies, atol=1e-12)


def test_json_output(pair, capsys):
    assert main(["--config", str(pair), "--format", "json", "--method", "brute"]) == 0
    lines = [json.loads(ln) for ln in capsys.readouterr().out.splitlines()]
    assert [ln["index"] for ln in lines] == [0, 1, 2]
    assert lines[0]["schema"] == 1 and lines[0]["meta"]["dimension"] == 169


def test_config_validation(tmp_path):
    (tmp_path / "pair.net").write_text(TRANSMON_PAIR)
    bad = tmp_path / "bad.yaml"
    bad.write_text("netlist: pair.net\nsweep: {param: 'flux:Lz', start: 0, stop: 1, steps: 2}\n")
    with pytest.raises(ConfigError, match="unknown inductor"):
        load_config(bad)
    bad.write_text("netlist: pair.net\nmethod: hier\n")
    with pytest.raises(ConfigError, match="partition"):
        load_config(bad)
    with pytest.raises(ConfigError):
        SweepSpec("volts:1")


def test_converge_option(tmp_path):
    (tmp_path / "pair.net").write_text(TRANSMON_PAIR)
    cfg = tmp_path / "c.yaml"
    cfg.write_text("netlist: pair.net\ndefault_truncation: {periodic: 2}\n"
                   "converge: {tol: 1.0e-6, targets: [[0, 1]]}\noutput: {levels: 2}\n")
    res = run_sweep(load_config(cfg))
    assert res[0].meta["dimension"] > 25


def test_failed_point_is_reported(pair, monkeypatch, capsys):
    from jjcircuit import sweep

    original = sweep.Pipeline.point

    def flaky(self, index, value, method, levels):
        if index == 1:
            raise RuntimeError("boom, twice")
        return original(self, index, value, method, levels)

    monkeypatch.setattr(sweep.Pipeline, "point", flaky)
    assert main(["--config", str(pair), "--method", "brute"]) == 3
    _, rows = _csv_rows(capsys.readouterr().out)
    assert rows[1]["error"] == "RuntimeError: boom, twice" and rows[1]["E0"] == ""


def test_shipped_example_loads():
    cfg = load_config(DATA / "jpsq.yaml")
    assert cfg.method == "hier+pt"
    assert cfg.sweep.steps == 11
    assert cfg.partition.modes() == ["J", "delta", "R", "L", "I", "l", "p"]
