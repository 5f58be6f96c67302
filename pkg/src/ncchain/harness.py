"""Experiment runner: sweep grids, seed aggregation and the CSV schemas used by the CLI."""

from __future__ import annotations

import csv
import hashlib
import io
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

from scipy import stats

from .analytic import analyze
from .model import ChainScenario, Scheme, dumps
from .mst import Engine, max_stable_throughput

GAMMA_GRID = tuple(float(g) for g in range(2, 41, 2))
BER_GRID = (0.0, 5e-7, 1e-6, 2e-6, 4e-6, 8e-6)
K_GRID = tuple(range(3, 9))
DEFAULT_SEEDS = tuple(range(1, 11))
DEFAULT_DURATION = 170.0

ANALYTIC_COLUMNS = ("k", "scheme", "retx", "gamma_1", "gamma_k", "bit_error_rate", "theta",
                    "w_flow1", "w_flow2", "w_avg", "stable", "converged", "iterations", "residual",
                    "max_utilization", "config_hash")
SIM_COLUMNS = ("k", "scheme", "retx", "gamma_1", "gamma_k", "bit_error_rate", "duration", "seeds",
               "theta_mean", "theta_ci95", "delay_mean", "delay_ci95", "delivered_mean",
               "dropped_mean", "coded_tx_mean", "collisions_mean", "queue_growing", "config_hash")
SEED_COLUMNS = ("k", "scheme", "retx", "gamma_1", "gamma_k", "bit_error_rate", "duration", "seed",
                "generated_f1", "generated_f2", "delivered_f1", "delivered_f2", "dropped_f1",
                "dropped_f2", "in_flight_f1", "in_flight_f2", "measured_theta",
                "measured_delay_mean", "delay_f1_mean", "delay_f2_mean", "coded_tx_count",
                "undecodable", "collisions", "retransmissions", "queue_growing", "config_hash")
MST_COLUMNS = ("k", "scheme", "engine", "retx", "gamma_star", "theta_star", "monotone", "probes")
COMPARE_COLUMNS = ("k", "scheme", "retx", "gamma_1", "gamma_k", "bit_error_rate", "theta_analytic",
                   "theta_sim", "theta_rel_error", "w_analytic", "delay_sim", "delay_rel_gap", "bound_ok")
JOIN_KEYS = ("k", "scheme", "retx", "gamma_1", "gamma_k", "bit_error_rate")


def fmt(value) -> str:
    """Stable text form: repr for reals so a CSV row round-trips exactly."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Scheme):
        return value.value
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(rows: Iterable[dict], columns: Sequence[str], stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row.get(c)) for c in columns])


def csv_text(rows: Iterable[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    write_csv(rows, columns, buf)
    return buf.getvalue()


def config_hash(scenario: ChainScenario) -> str:
    return hashlib.sha256(dumps(scenario).encode()).hexdigest()[:12]


def _scenario_fields(sc: ChainScenario) -> dict:
    return {"k": sc.k, "scheme": sc.scheme, "retx": sc.retransmission_enabled,
            "gamma_1": float(sc.gamma_1), "gamma_k": float(sc.gamma_k),
            "bit_error_rate": float(sc.phy.bit_error_rate), "config_hash": config_hash(sc)}


def mean_ci95(values: Sequence[float]) -> tuple[float, float]:
    """Sample mean and the half-width of its Student-t 95% interval."""
    n = len(values)
    if n == 0:
        return math.nan, math.nan
    mean = statistics.fmean(values)
    if n == 1:
        return mean, math.nan
    half = stats.t.ppf(0.975, n - 1) * statistics.stdev(values) / math.sqrt(n)
    return mean, float(half)


# ---------------------------------------------------------------- single points
def analytic_row(scenario: ChainScenario) -> dict:
    rep = analyze(scenario)
    row = _scenario_fields(scenario)
    row.update(theta=rep.theta, w_flow1=rep.w_flow1, w_flow2=rep.w_flow2, w_avg=rep.w_avg,
               stable=rep.stable, converged=rep.converged, iterations=rep.iterations,
               residual=rep.residual, max_utilization=rep.max_utilization)
    return row


def seed_row(scenario: ChainScenario, duration: float, seed: int, trace=None) -> dict:
    from .sim import run
    res = run(scenario, duration, seed, trace=trace)
    row = _scenario_fields(scenario)
    row.update(duration=float(duration), seed=seed, generated_f1=res.generated_f1,
               generated_f2=res.generated_f2, delivered_f1=res.delivered_f1,
               delivered_f2=res.delivered_f2, dropped_f1=res.dropped_f1, dropped_f2=res.dropped_f2,
               in_flight_f1=res.in_flight_f1, in_flight_f2=res.in_flight_f2,
               measured_theta=res.measured_theta, measured_delay_mean=res.measured_delay_mean,
               delay_f1_mean=res.delay_f1_mean, delay_f2_mean=res.delay_f2_mean,
               coded_tx_count=res.coded_tx_count, undecodable=res.undecodable,
               collisions=sum(res.collision_count), retransmissions=sum(res.retransmission_count),
               queue_growing=res.queue_growing)
    return row


def aggregate_seeds(rows: Sequence[dict]) -> dict:
    first = rows[0]
    out = {key: first[key] for key in JOIN_KEYS + ("duration", "config_hash")}
    out["seeds"] = " ".join(str(r["seed"]) for r in rows)
    out["theta_mean"], out["theta_ci95"] = mean_ci95([r["measured_theta"] for r in rows])
    delays = [r["measured_delay_mean"] for r in rows if r["measured_delay_mean"] is not None]
    out["delay_mean"], out["delay_ci95"] = mean_ci95(delays) if delays else (None, None)
    out["delivered_mean"] = statistics.fmean(r["delivered_f1"] + r["delivered_f2"] for r in rows)
    out["dropped_mean"] = statistics.fmean(r["dropped_f1"] + r["dropped_f2"] for r in rows)
    out["coded_tx_mean"] = statistics.fmean(r["coded_tx_count"] for r in rows)
    out["collisions_mean"] = statistics.fmean(r["collisions"] for r in rows)
    grown = sum(bool(r["queue_growing"]) for r in rows)
    out["queue_growing"] = 2 * grown > len(rows)
    return out


def simulated_row(scenario: ChainScenario, duration: float, seeds: Sequence[int]) -> dict:
    return aggregate_seeds([seed_row(scenario, duration, s) for s in seeds])


# ---------------------------------------------------------------- grids
@dataclass(frozen=True)
class SweepPoint:
    index: int
    scenario: ChainScenario


def sweep_points(base: ChainScenario, vary: str, schemes: Sequence[Scheme], retx: Sequence[bool],
                 grid: Sequence[float] | None = None) -> list[SweepPoint]:
    """Cartesian grid in a fixed order: scheme, retransmission, then the varied axis."""
    if vary == "gamma":
        values = GAMMA_GRID if grid is None else grid
    elif vary == "ber":
        values = BER_GRID if grid is None else grid
    else:
        raise ValueError(f"cannot vary {vary!r}; use gamma or ber")
    out = []
    for scheme in schemes:
        for on in retx:
            for v in values:
                sc = replace(base, scheme=scheme, retransmission_enabled=on)
                sc = sc.with_gamma(float(v)) if vary == "gamma" else sc.with_phy(bit_error_rate=float(v))
                out.append(SweepPoint(len(out), sc))
    return out


def _run_point(args) -> tuple[int, dict]:
    index, scenario, engine, duration, seeds = args
    if engine == Engine.ANALYTIC.value:
        return index, analytic_row(scenario)
    return index, simulated_row(scenario, duration, seeds)


def run_parallel(fn: Callable, tasks: Sequence, jobs: int = 1) -> list:
    """Map ``fn`` over ``tasks`` keeping input order; jobs > 1 uses worker processes."""
    if jobs <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def run_sweep(points: Sequence[SweepPoint], engine: str, duration: float = DEFAULT_DURATION,
              seeds: Sequence[int] = DEFAULT_SEEDS, jobs: int = 1) -> list[dict]:
    tasks = [(p.index, p.scenario, Engine(engine).value, duration, tuple(seeds)) for p in points]
    results = run_parallel(_run_point, tasks, jobs)
    return [row for _, row in sorted(results, key=lambda r: r[0])]


def _run_mst(args) -> dict:
    k, scheme, engine, retx, gamma_ini, step, duration, seeds, base = args
    template = replace(base, k=k, scheme=scheme, retransmission_enabled=retx)
    res = max_stable_throughput(template, gamma_ini, step, engine, duration=duration, seeds=seeds)
    return {"k": k, "scheme": scheme, "engine": Engine(engine), "retx": retx,
            "gamma_star": res.gamma_star, "theta_star": res.theta_star, "monotone": res.monotone,
            "probes": len(res.probes)}


def run_mst(base: ChainScenario, ks: Sequence[int], schemes: Sequence[Scheme], engines: Sequence[str],
            retx: bool = True, gamma_ini: float = 2.0, step: float = 2.0,
            duration: float = DEFAULT_DURATION, seeds: Sequence[int] = (1, 2, 3), jobs: int = 1) -> list[dict]:
    tasks = [(k, s, Engine(e).value, retx, gamma_ini, step, duration, tuple(seeds), base)
             for e in engines for s in schemes for k in ks]
    rows = run_parallel(_run_mst, tasks, jobs)
    for row in rows:
        row["engine"] = row["engine"].value
    return rows


# ---------------------------------------------------------------- compare
def _key(row: dict) -> tuple:
    """Join key from a CSV row as read back by csv.DictReader."""
    return (int(row["k"]), row["scheme"], row["retx"], float(row["gamma_1"]), float(row["gamma_k"]),
            float(row["bit_error_rate"]))


def _num(text: str) -> float | None:
    return float(text) if text not in ("", None) else None


def compare(analytic_rows: Sequence[dict], sim_rows: Sequence[dict], slack: float = 0.0) -> list[dict]:
    """Inner join on the scenario columns, in the order of the analytic table."""
    sims = {_key(r): r for r in sim_rows}
    out = []
    for a in analytic_rows:
        s = sims.get(_key(a))
        if s is None:
            continue
        theta_a, theta_s = _num(a["theta"]), _num(s["theta_mean"])
        w_a, d_s = _num(a["w_avg"]), _num(s["delay_mean"])
        rel = abs(theta_s - theta_a) / theta_a if theta_a else None
        gap = (d_s - w_a) / w_a if d_s is not None and w_a not in (None, 0.0) and math.isfinite(w_a) else None
        ok = d_s is not None and w_a is not None and d_s <= w_a * (1.0 + slack)
        out.append({"k": int(a["k"]), "scheme": a["scheme"], "retx": a["retx"],
                    "gamma_1": float(a["gamma_1"]), "gamma_k": float(a["gamma_k"]),
                    "bit_error_rate": float(a["bit_error_rate"]), "theta_analytic": theta_a,
                    "theta_sim": theta_s, "theta_rel_error": rel, "w_analytic": w_a, "delay_sim": d_s,
                    "delay_rel_gap": gap, "bound_ok": ok})
    return out


def gnuplot_script(csv_path: str, x_column: str, y_columns: Sequence[str], columns: Sequence[str],
                   title: str = "") -> str:
    """A gnuplot script plotting ``y_columns`` against ``x_column`` from a CSV written here."""
    idx = {c: i + 1 for i, c in enumerate(columns)}
    lines = ["set datafile separator ','", "set key autotitle columnhead", "set grid",
             f"set xlabel '{x_column}'"]
    if title:
        lines.append(f"set title '{title}'")
    plots = [f"'{csv_path}' using {idx[x_column]}:{idx[y]} with linespoints title '{y}'" for y in y_columns]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"
