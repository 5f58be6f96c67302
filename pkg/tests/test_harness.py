import csv
import io
import math

import pytest

from ncchain import ChainScenario, Scheme
from ncchain import harness
from ncchain.model import dumps


def test_fmt():
    assert harness.fmt(None) == ""
    assert harness.fmt(True) == "true"
    assert harness.fmt(Scheme.CODING) == "coding"
    assert harness.fmt(0.1 + 0.2) == repr(0.1 + 0.2)
    assert harness.fmt(3) == "3"


def test_csv_round_trips_floats():
    x = 1 / 3
    text = harness.csv_text([{"a": x, "b": None}], ("a", "b"))
    row = next(csv.DictReader(io.StringIO(text)))
    assert float(row["a"]) == x
    assert row["b"] == ""


def test_config_hash():
    a = ChainScenario()
    assert harness.config_hash(a) == harness.config_hash(ChainScenario())
    assert harness.config_hash(a) != harness.config_hash(a.with_gamma(21.0))
    assert len(harness.config_hash(a)) == 12


def test_mean_ci95():
    mean, half = harness.mean_ci95([1.0, 2.0, 3.0])
    assert mean == 2.0
    assert half == pytest.approx(4.302652729911275 / math.sqrt(3))
    assert math.isnan(harness.mean_ci95([5.0])[1])
    assert math.isnan(harness.mean_ci95([])[0])


def test_default_grids():
    assert harness.GAMMA_GRID[0] == 2.0 and harness.GAMMA_GRID[-1] == 40.0 and len(harness.GAMMA_GRID) == 20
    assert harness.BER_GRID == (0.0, 5e-7, 1e-6, 2e-6, 4e-6, 8e-6)
    assert harness.K_GRID == (3, 4, 5, 6, 7, 8)
    assert harness.DEFAULT_SEEDS == tuple(range(1, 11))


def test_sweep_points_order():
    pts = harness.sweep_points(ChainScenario(), "gamma", list(Scheme), [True, False])
    assert len(pts) == 2 * 2 * 20
    assert [p.index for p in pts] == list(range(80))
    first, last = pts[0].scenario, pts[-1].scenario
    assert first.scheme is Scheme.NONCODING and first.retransmission_enabled and first.gamma_1 == 2.0
    assert last.scheme is Scheme.CODING and not last.retransmission_enabled and last.gamma_k == 40.0


def test_sweep_points_ber():
    pts = harness.sweep_points(ChainScenario(), "ber", [Scheme.NONCODING], [True])
    assert [p.scenario.phy.bit_error_rate for p in pts] == list(harness.BER_GRID)


def test_sweep_points_bad_axis():
    with pytest.raises(ValueError):
        harness.sweep_points(ChainScenario(), "k", [Scheme.NONCODING], [True])


def test_parallel_sweep_matches_serial():
    pts = harness.sweep_points(ChainScenario(), "gamma", list(Scheme), [True], grid=[4.0, 12.0, 20.0])
    serial = harness.run_sweep(pts, "analytic", jobs=1)
    parallel = harness.run_sweep(pts, "analytic", jobs=2)
    cols = harness.ANALYTIC_COLUMNS
    assert harness.csv_text(serial, cols) == harness.csv_text(parallel, cols)


def test_seed_rows_aggregate():
    sc = ChainScenario(gamma_1=10.0, gamma_k=10.0)
    rows = [harness.seed_row(sc, 20.0, s) for s in (1, 2, 3)]
    agg = harness.aggregate_seeds(rows)
    assert agg["seeds"] == "1 2 3"
    assert agg["theta_mean"] == pytest.approx(sum(r["measured_theta"] for r in rows) / 3)
    assert agg["theta_ci95"] > 0
    assert agg["config_hash"] == harness.config_hash(sc)
    assert agg["queue_growing"] is False


def test_row_reproducible_from_hash_and_seed():
    sc = ChainScenario(scheme=Scheme.CODING, gamma_1=15.0, gamma_k=15.0)
    row = harness.seed_row(sc, 15.0, 4)
    from ncchain.model import loads
    rebuilt = loads(dumps(sc))
    assert harness.config_hash(rebuilt) == row["config_hash"]
    assert harness.seed_row(rebuilt, 15.0, 4) == row


def _read(rows, cols):
    return list(csv.DictReader(io.StringIO(harness.csv_text(rows, cols))))


def test_compare_is_inner_join():
    a = [{"k": 5, "scheme": Scheme.NONCODING, "retx": True, "gamma_1": g, "gamma_k": g,
          "bit_error_rate": 2e-6, "theta": 2 * g, "w_avg": 0.05} for g in (4.0, 8.0, 12.0)]
    s = [{"k": 5, "scheme": Scheme.NONCODING, "retx": True, "gamma_1": g, "gamma_k": g,
          "bit_error_rate": 2e-6, "theta_mean": 2 * g * 1.05, "delay_mean": d}
         for g, d in ((8.0, 0.04), (12.0, 0.06), (16.0, 0.01))]
    out = harness.compare(_read(a, harness.ANALYTIC_COLUMNS), _read(s, harness.SIM_COLUMNS))
    assert len(out) == 2
    assert [r["gamma_1"] for r in out] == [8.0, 12.0]
    assert [r["bound_ok"] for r in out] == [True, False]
    assert out[0]["theta_rel_error"] == pytest.approx(0.05)
    assert out[1]["delay_rel_gap"] == pytest.approx(0.2)


def test_compare_slack():
    a = [{"k": 5, "scheme": "coding", "retx": False, "gamma_1": 4.0, "gamma_k": 4.0,
          "bit_error_rate": 0.0, "theta": 8.0, "w_avg": 0.05}]
    s = [{"k": 5, "scheme": "coding", "retx": False, "gamma_1": 4.0, "gamma_k": 4.0,
          "bit_error_rate": 0.0, "theta_mean": 8.0, "delay_mean": 0.0505}]
    ar, sr = _read(a, harness.ANALYTIC_COLUMNS), _read(s, harness.SIM_COLUMNS)
    assert not harness.compare(ar, sr)[0]["bound_ok"]
    assert harness.compare(ar, sr, slack=0.02)[0]["bound_ok"]


def test_gnuplot_script():
    text = harness.gnuplot_script("out.csv", "gamma_1", ["theta", "w_avg"], harness.ANALYTIC_COLUMNS, "t")
    assert "using 4:7" in text and "using 4:10" in text
    assert "set datafile separator ','" in text
