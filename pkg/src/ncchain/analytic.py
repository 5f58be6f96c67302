"""Pieces shared by the non-coding and coding analytic pipelines, plus the dispatcher."""

from __future__ import annotations

import math
from typing import Sequence

from .dcf import TxClass, mean_service_time
from .link import LinkState, neighbors
from .model import ChainScenario, PerformanceReport, Scheme


class UnstableError(ArithmeticError):
    """Some node's utilisation reached one; queue waiting times are undefined."""


def attempt_rates(own1: float, ownk: float, middle: Sequence[float]) -> list[float]:
    """Per-node transmission-attempt rates with sources counting only their own flow."""
    return [own1, *middle, ownk]


def carrier_sense_loads(rates: Sequence[float], hops: int) -> list[float]:
    k = len(rates)
    return [sum(rates[x - 1] for x in neighbors(i, k, hops)) for i in range(1, k + 1)]


def native_service_times(link: LinkState, weights1: Sequence[float], weights2: Sequence[float],
                         cs_loads: Sequence[float], scenario: ChainScenario,
                         normalized: bool = False) -> list[float]:
    """Mean native service time 1/mu^n at every node.

    Sources serve one next hop. A relay serves flow 1 toward i+1 and flow 2
    toward i-1, so its mean is the rate-weighted mix of the two.
    """
    phy, beta, k = scenario.phy, scenario.beta, scenario.k
    out = []
    for i in range(1, k + 1):
        lam = cs_loads[i - 1]
        if i == 1:
            out.append(mean_service_time(link.success(1, 2), TxClass.NATIVE, lam, phy, beta, normalized))
            continue
        if i == k:
            out.append(mean_service_time(link.success(k, k - 1), TxClass.NATIVE, lam, phy, beta, normalized))
            continue
        fwd = mean_service_time(link.success(i, i + 1), TxClass.NATIVE, lam, phy, beta, normalized)
        back = mean_service_time(link.success(i, i - 1), TxClass.NATIVE, lam, phy, beta, normalized)
        w1, w2 = weights1[i - 1], weights2[i - 1]
        if w1 + w2 <= 0:
            w1 = w2 = 1.0
        out.append((w1 * fwd + w2 * back) / (w1 + w2))
    return out


def coded_service_times(link: LinkState, cs_loads: Sequence[float], scenario: ChainScenario,
                        normalized: bool = False) -> list[float]:
    """1/mu^c per node; a coded attempt succeeds only when both neighbours receive it."""
    phy, beta, k = scenario.phy, scenario.beta, scenario.k
    out = [math.inf] * k
    for i in range(2, k):
        p_both = link.success(i, i + 1) * link.success(i, i - 1)
        out[i - 1] = mean_service_time(p_both, TxClass.CODED, cs_loads[i - 1], phy, beta, normalized)
    return out


def aggregate_delay(w_nodes: Sequence[float], scenario: ChainScenario) -> tuple[float, float, float]:
    """Per-flow sums over the source and relays, then the generation-rate weighted mean."""
    relays = sum(w_nodes[1:-1])
    w1 = w_nodes[0] + relays
    w2 = w_nodes[-1] + relays
    g1, gk = scenario.gamma_1, scenario.gamma_k
    if g1 + gk > 0:
        avg = (g1 * w1 + gk * w2) / (g1 + gk)
    else:
        avg = 0.5 * (w1 + w2)
    return w1, w2, avg


def analyze(scenario: ChainScenario, **kwargs) -> PerformanceReport:
    """Run whichever pipeline matches ``scenario.scheme``."""
    if scenario.scheme is Scheme.CODING:
        from .coding import analyze_coding
        return analyze_coding(scenario, **kwargs)
    from .noncoding import analyze_noncoding
    return analyze_noncoding(scenario, **kwargs)
