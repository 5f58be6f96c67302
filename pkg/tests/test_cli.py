import csv
import subprocess
import sys

import pytest

from ncchain.cli import main


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_analytic_stdout(capsys):
    assert main(["analytic", "--gamma", "20"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("k,scheme,retx,gamma_1")
    assert out[1].startswith("5,noncoding,true,20.0,20.0,2e-06,")


def test_analytic_nodes(tmp_path):
    out, nodes = tmp_path / "a.csv", tmp_path / "n.csv"
    assert main(["analytic", "--scheme", "coding", "--out", str(out), "--nodes-out", str(nodes)]) == 0
    assert rows(out)[0]["scheme"] == "coding"
    assert [r["node"] for r in rows(nodes)] == ["1", "2", "3", "4", "5"]


def test_config_file(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("k = 4\ngamma_1 = 7.5\nscheme = coding\n")
    out = tmp_path / "a.csv"
    assert main(["analytic", "--config", str(cfg), "--out", str(out)]) == 0
    row = rows(out)[0]
    assert (row["k"], row["scheme"], row["gamma_1"]) == ("4", "coding", "7.5")


@pytest.mark.parametrize("argv", [
    ["analytic", "--bogus"],
    ["frobnicate"],
    ["analytic", "--k", "2"],
    ["simulate", "--seeds", "x"],
    ["analytic", "--config", "/nonexistent/file.cfg"],
])
def test_errors_exit_nonzero(argv, capsys):
    assert main(argv) != 0
    assert capsys.readouterr().err


def test_bad_config_file(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("warp_factor = 9\n")
    assert main(["analytic", "--config", str(cfg)]) != 0
    assert "warp_factor" in capsys.readouterr().err


def test_simulate_byte_identical(tmp_path):
    args = ["simulate", "--gamma", "15", "--duration", "20", "--seeds", "2"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    pa, pb = tmp_path / "pa.csv", tmp_path / "pb.csv"
    assert main(args + ["--out", str(a), "--per-seed-out", str(pa)]) == 0
    assert main(args + ["--out", str(b), "--per-seed-out", str(pb)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert pa.read_bytes() == pb.read_bytes()
    assert [r["seed"] for r in rows(pa)] == ["1", "2"]
    assert rows(a)[0]["seeds"] == "1 2"


def test_simulate_trace(tmp_path):
    trace = tmp_path / "t.csv"
    assert main(["simulate", "--k", "3", "--gamma", "5", "--duration", "5", "--seeds", "1",
                 "--trace", str(trace), "--out", str(tmp_path / "s.csv")]) == 0
    events = rows(trace)
    assert events and set(events[0]) == {"time", "node", "event", "packet"}
    assert {"generate", "tx", "deliver"} <= {e["event"] for e in events}


def test_sweep_and_compare(tmp_path):
    a, s, c, gp = (tmp_path / n for n in ("a.csv", "s.csv", "c.csv", "a.gp"))
    common = ["sweep", "--vary", "gamma", "--grid", "4,8", "--scheme", "noncoding", "--retx-only"]
    assert main(common + ["--out", str(a), "--gnuplot", str(gp)]) == 0
    assert main(common + ["--engine", "simulated", "--seeds", "2", "--duration", "30",
                          "--out", str(s)]) == 0
    assert main(["compare", str(a), str(s), "--out", str(c), "--slack", "0.02"]) == 0
    joined = rows(c)
    assert len(joined) == 2
    assert all(r["bound_ok"] == "true" for r in joined)
    assert "plot" in gp.read_text()


def test_sweep_ber_default_rate(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["sweep", "--vary", "ber", "--scheme", "noncoding", "--out", str(out)]) == 0
    table = rows(out)
    assert len(table) == 12
    assert {r["gamma_1"] for r in table} == {"20.0"}


def test_compare_rejects_swapped_inputs(tmp_path, capsys):
    a = tmp_path / "a.csv"
    assert main(["sweep", "--vary", "gamma", "--grid", "4", "--scheme", "noncoding", "--out", str(a)]) == 0
    assert main(["compare", str(a), str(a)]) != 0


def test_mst_analytic(tmp_path):
    out = tmp_path / "m.csv"
    assert main(["mst", "--k-range", "3", "--scheme", "noncoding", "--gamma-ini", "40", "--step", "4",
                 "--out", str(out)]) == 0
    (row,) = rows(out)
    assert row["engine"] == "analytic" and row["k"] == "3"
    assert 40 <= float(row["gamma_star"]) < 80


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ncchain", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "simulate" in proc.stdout
