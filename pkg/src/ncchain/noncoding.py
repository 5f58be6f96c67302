"""Plain store-and-forward chain: flow balance with retransmission, throughput, delay bound."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .analytic import (UnstableError, aggregate_delay, attempt_rates, carrier_sense_loads,
                       native_service_times)
from .fixedpoint import DivergenceError, FixedPointResult, solve
from .link import LinkState, link_state
from .model import ChainScenario, NodeRates, PerformanceReport, Scheme


def _retx_denominator(p: float, p_drop: float, retransmit: bool = True) -> float:
    """1 - (1-p)(1-P^d); with retransmission switched off there is no feedback loop."""
    if not retransmit:
        return 1.0
    d = 1.0 - (1.0 - p) * (1.0 - p_drop)
    if d <= 0:
        raise ZeroDivisionError("retransmission feedback does not close (p = 0)")
    return d


def flow_balance_step(rates: tuple[Sequence[float], Sequence[float]], link: LinkState,
                      scenario: ChainScenario) -> tuple[list[float], list[float]]:
    """One pass of the per-flow arrival recurrences for the given link state.

    Each node's own retransmission term is closed algebraically, so a single
    sweep along the chain is exact for fixed ``link``; ``rates`` is not read.
    When the scenario disables retransmission the feedback term is dropped.
    """
    k = scenario.k
    retx = scenario.retransmission_enabled
    f1 = [0.0] * k
    f2 = [0.0] * k
    f1[0] = scenario.gamma_1 / _retx_denominator(link.success(1, 2), link.drop(1, 2), retx)
    for i in range(2, k):
        inflow = f1[i - 2] * link.success(i - 1, i)
        f1[i - 1] = inflow / _retx_denominator(link.success(i, i + 1), link.drop(i, i + 1), retx)
    f1[k - 1] = f1[k - 2] * link.success(k - 1, k)

    f2[k - 1] = scenario.gamma_k / _retx_denominator(link.success(k, k - 1), link.drop(k, k - 1), retx)
    for i in range(k - 1, 1, -1):
        inflow = f2[i] * link.success(i + 1, i)
        f2[i - 1] = inflow / _retx_denominator(link.success(i, i - 1), link.drop(i, i - 1), retx)
    f2[0] = f2[1] * link.success(2, 1)
    return f1, f2


def node_attempt_rates(f1: Sequence[float], f2: Sequence[float]) -> list[float]:
    middle = [a + b for a, b in zip(f1[1:-1], f2[1:-1])]
    return attempt_rates(f1[0], f2[-1], middle)


def throughput(f1: Sequence[float], f2: Sequence[float]) -> float:
    """Arrival rate at the two destinations."""
    return f2[0] + f1[-1]


def node_waits(f1: Sequence[float], f2: Sequence[float], mu: Sequence[float]) -> list[float]:
    """Sojourn time 1/(mu - lambda) per node; sources carry only their own flow."""
    loads = node_attempt_rates(f1, f2)
    out = []
    for lam, m in zip(loads, mu):
        if lam >= m:
            raise UnstableError(f"lambda {lam} >= mu {m}")
        out.append(1.0 / (m - lam))
    return out


def delay_upper_bound(f1: Sequence[float], f2: Sequence[float], mu: Sequence[float],
                      scenario: ChainScenario) -> tuple[float, float, float]:
    return aggregate_delay(node_waits(f1, f2, mu), scenario)


def initial_state(scenario: ChainScenario) -> np.ndarray:
    k = scenario.k
    return np.array([scenario.gamma_1] * k + [scenario.gamma_k] * k, dtype=float)


def _link_for(f1, f2, scenario: ChainScenario) -> LinkState:
    return link_state(node_attempt_rates(f1, f2), scenario.phy, scenario.beta)


def analyze_noncoding(scenario: ChainScenario, *, normalized: bool = False, damping: float = 0.5,
                      tol: float = 1e-9, max_iter: int = 100_000) -> PerformanceReport:
    k = scenario.k

    def update(x: np.ndarray) -> np.ndarray:
        f1, f2 = flow_balance_step((x[:k], x[k:]), _link_for(x[:k], x[k:], scenario), scenario)
        return np.array(f1 + f2)

    try:
        fp = solve(update, initial_state(scenario), damping=damping, tol=tol, max_iter=max_iter)
    except DivergenceError as exc:
        fp = FixedPointResult(exc.last, math.inf, exc.iterations, False)
    f1, f2 = list(fp.x[:k]), list(fp.x[k:])
    link = _link_for(f1, f2, scenario)
    loads = node_attempt_rates(f1, f2)
    cs = carrier_sense_loads(loads, scenario.phy.carrier_sense_hops)
    service = native_service_times(link, f1, f2, cs, scenario, normalized)
    mu = [1.0 / s for s in service]

    stable = fp.converged and all(lam < m for lam, m in zip(loads, mu))
    if stable:
        waits = node_waits(f1, f2, mu)
        w1, w2, wavg = aggregate_delay(waits, scenario)
    else:
        waits = [1.0 / (m - lam) if lam < m else math.inf for lam, m in zip(loads, mu)]
        w1 = w2 = wavg = math.inf

    nodes = []
    for i in range(1, k + 1):
        n1 = f1[i - 1] if i < k else 0.0
        n2 = f2[i - 1] if i > 1 else 0.0
        in1 = scenario.gamma_1 if i == 1 else f1[i - 2] * link.success(i - 1, i)
        in2 = scenario.gamma_k if i == k else f2[i] * link.success(i + 1, i)
        nodes.append(NodeRates(
            node=i, lambda_f1=f1[i - 1], lambda_f2=f2[i - 1], lambda_n1=n1, lambda_n2=n2,
            lambda_in_n1=in1, lambda_in_n2=in2, mu_n=mu[i - 1], mu_n_seen=mu[i - 1],
            rho_n=loads[i - 1] * service[i - 1], w_node=waits[i - 1]))
    return PerformanceReport(Scheme.NONCODING, throughput(f1, f2), w1, w2, wavg, tuple(nodes),
                             stable, fp.converged, fp.iterations, fp.residual)
