"""Opportunistic XOR coding at relays: a two-class non-preemptive priority model.

Per node the solver state is the encoder arrivals of both flows and the
arrivals into the native (per flow) and coded queues:

    x = [f1 (k), f2 (k), n1 (k), n2 (k), c (k)]
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .analytic import (UnstableError, aggregate_delay, attempt_rates, carrier_sense_loads,
                       coded_service_times, native_service_times)
from .fixedpoint import DivergenceError, solve
from .link import LinkState, link_state
from .model import ChainScenario, NodeRates, PerformanceReport, Scheme
from .noncoding import _retx_denominator


# while iterating, overloaded queues are evaluated at this utilisation instead of failing
SATURATION = 1.0 - 1e-3
# this many consecutive overloaded iterates means no stable fixed point exists
OVERLOAD_STREAK = 200


def p_mtc(lam_own: float, lam_other: float, mu_seen: float, w_qn: float,
          saturate: bool = False) -> float:
    """Probability a queued native packet gets a coding partner before its turn.

    Own-flow backlog ahead of the packet is geometric with ratio
    lam_own/mu_seen; opposite-flow arrivals over the wait are Poisson.
    With ``saturate`` an overloaded own flow takes the rho -> 1 limit, 0.
    """
    rho = lam_own / mu_seen
    if rho >= 1.0:
        if not saturate:
            raise UnstableError(f"own-flow native load {rho} >= 1")
        rho = 1.0
    if w_qn < 0:
        raise ValueError("waiting time must be non-negative")
    return -math.expm1(w_qn * lam_other * (rho - 1.0))


def p_mtc_series(lam_own: float, lam_other: float, mu_seen: float, w_qn: float,
                 tol: float = 1e-12) -> float:
    """Double-sum reference for :func:`p_mtc`: sum_k Pr[Poisson > k] * Pr[backlog = k].

    Stops once the remaining tail, bounded by Pr[Poisson > k] * rho^(k+1), is below ``tol``.
    """
    rho = lam_own / mu_seen
    a = lam_other * w_qn
    pmf = math.exp(-a)
    cdf = 0.0
    geo = 1.0 - rho
    total = 0.0
    for k in range(1_000_000):
        if k:
            pmf *= a / k
        cdf += pmf
        survival = max(1.0 - cdf, 0.0)
        total += survival * geo
        geo *= rho
        if survival * rho ** (k + 1) < tol:
            break
    return total


@dataclass(frozen=True)
class PriorityWaits:
    w_qc: float
    w_qn: float
    mu_n_seen: float
    residual: float


def priority_waits(lam_n1: float, lam_n2: float, lam_c: float, mu_n: float, mu_c: float,
                   saturate: bool = False) -> PriorityWaits:
    """Queue waits under non-preemptive priority of coded over native packets.

    With ``saturate`` an overloaded node is scaled back to SATURATION utilisation.
    """
    rho_n = (lam_n1 + lam_n2) / mu_n
    rho_c = lam_c / mu_c if lam_c > 0 else 0.0
    if rho_n + rho_c >= 1.0:
        if not saturate:
            raise UnstableError(f"utilisation {rho_n + rho_c} >= 1")
        scale = SATURATION / (rho_n + rho_c)
        rho_n, rho_c = rho_n * scale, rho_c * scale
    r_bar = rho_n / mu_n + (rho_c / mu_c if rho_c > 0 else 0.0)
    w_qc = r_bar / (1.0 - rho_c)
    w_qn = r_bar / ((1.0 - rho_c) * (1.0 - rho_c - rho_n))
    mu_seen = lam_n1 + lam_n2 + 1.0 / (w_qn + 1.0 / mu_n)
    return PriorityWaits(w_qc, w_qn, mu_seen, r_bar)


@dataclass(frozen=True)
class QueueSplit:
    lambda_n1: float
    lambda_n2: float
    lambda_c: float
    clamped: bool = False


def queue_split_step(f1: float, f2: float, n1: float, n2: float, mu_seen: float, w_qn: float,
                     saturate: bool = False) -> QueueSplit:
    """Route encoder arrivals into native or coded queues.

    ``n1``/``n2`` are the current native-queue rates used for the empty-queue
    probabilities and the move-to-coded chances. With ``saturate`` a saturated
    per-flow queue counts as never empty.
    """
    pi0_1 = 1.0 - n1 / mu_seen
    pi0_2 = 1.0 - n2 / mu_seen
    if pi0_1 <= 0 or pi0_2 <= 0:
        if not saturate:
            raise UnstableError("per-flow native queue saturated")
        pi0_1, pi0_2 = max(pi0_1, 0.0), max(pi0_2, 0.0)
    new1 = f1 * pi0_2 * (1.0 - p_mtc(n1, n2, mu_seen, w_qn, saturate))
    new2 = f2 * pi0_1 * (1.0 - p_mtc(n2, n1, mu_seen, w_qn, saturate))
    c = (f1 + f2 - new1 - new2) / 2.0
    if c < 0:
        return QueueSplit(new1, new2, 0.0, True)
    return QueueSplit(new1, new2, c)


@dataclass(frozen=True)
class InputRates:
    n1: list[float]
    n2: list[float]
    c1: list[float]
    c2: list[float]


def input_rates(n1: Sequence[float], n2: Sequence[float], c: Sequence[float], link: LinkState,
                scenario: ChainScenario) -> InputRates:
    """Over-the-air arrivals given each node's queue output rates.

    Sources emit no coded packets and no opposite-flow natives, so the
    boundary zeros fall out of ``c[0] = c[k-1] = 0``.
    """
    k = scenario.k
    in_n1 = [0.0] * k
    in_n2 = [0.0] * k
    in_c1 = [0.0] * k
    in_c2 = [0.0] * k
    in_n1[0] = scenario.gamma_1
    in_n2[k - 1] = scenario.gamma_k
    for i in range(2, k + 1):
        p = link.success(i - 1, i)
        in_n1[i - 1] = n1[i - 2] * p
        in_c1[i - 1] = c[i - 2] * p
    for i in range(1, k):
        p = link.success(i + 1, i)
        in_n2[i - 1] = n2[i] * p
        in_c2[i - 1] = c[i] * p
    return InputRates(in_n1, in_n2, in_c1, in_c2)


def encoder_balance_step(inputs: InputRates, link: LinkState,
                         scenario: ChainScenario) -> tuple[list[float], list[float]]:
    """Encoder arrivals per flow: natives + decoded coded packets + own retransmissions."""
    k = scenario.k
    retx = scenario.retransmission_enabled
    f1 = [0.0] * k
    f2 = [0.0] * k
    for i in range(1, k):
        dec = link.decode(i - 1, i) if i > 1 else 1.0
        fresh = inputs.n1[i - 1] + inputs.c1[i - 1] * dec
        f1[i - 1] = fresh / _retx_denominator(link.success(i, i + 1), link.drop(i, i + 1), retx)
    f1[k - 1] = inputs.n1[k - 1] + inputs.c1[k - 1]
    for i in range(2, k + 1):
        dec = link.decode(i + 1, i) if i < k else 1.0
        fresh = inputs.n2[i - 1] + inputs.c2[i - 1] * dec
        f2[i - 1] = fresh / _retx_denominator(link.success(i, i - 1), link.drop(i, i - 1), retx)
    f2[0] = inputs.n2[0] + inputs.c2[0]
    return f1, f2


@dataclass
class _Snapshot:
    link: LinkState
    cs: list[float]
    svc_n: list[float]
    svc_c: list[float]
    waits: list[PriorityWaits | None]
    inputs: InputRates | None = None


class CodingModel:
    """Builds the one-step update for the fixed-point solver."""

    def __init__(self, scenario: ChainScenario, *, normalized: bool = False, force_native: bool = False):
        self.scenario = scenario
        self.k = scenario.k
        self.normalized = normalized
        self.force_native = force_native
        self.clamped = False
        self.overload_streak = 0
        # equal sources make the chain mirror-symmetric, and so must be the solution
        self.symmetric = scenario.gamma_1 == scenario.gamma_k

    def unpack(self, x: np.ndarray):
        k = self.k
        return tuple(list(x[j * k:(j + 1) * k]) for j in range(5))

    def initial_state(self) -> np.ndarray:
        k, s = self.k, self.scenario
        f1 = [s.gamma_1] * k
        f2 = [s.gamma_k] * k
        # relays start fully coded, the least loaded split, so the first
        # priority-queue evaluation is well inside the stable region
        c = [0.0] + [0.0 if self.force_native else min(a, b) for a, b in zip(f1[1:-1], f2[1:-1])] + [0.0]
        n1 = [a - x for a, x in zip(f1, c)]
        n2 = [b - x for b, x in zip(f2, c)]
        n1[-1] = 0.0
        n2[0] = 0.0
        return np.array(f1 + f2 + n1 + n2 + c, dtype=float)

    def mirror(self, x: np.ndarray) -> np.ndarray:
        """Swap the flows and reverse the chain."""
        f1, f2, n1, n2, c = (np.asarray(v)[::-1] for v in self.unpack(x))
        return np.concatenate([f2, f1, n2, n1, c])

    def snapshot(self, n1, n2, c, saturate: bool = False) -> _Snapshot:
        s = self.scenario
        loads = attempt_rates(n1[0], n2[-1], [a + b + d for a, b, d in zip(n1[1:-1], n2[1:-1], c[1:-1])])
        link = link_state(loads, s.phy, s.beta)
        cs = carrier_sense_loads(loads, s.phy.carrier_sense_hops)
        svc_n = native_service_times(link, n1, n2, cs, s, self.normalized)
        svc_c = coded_service_times(link, cs, s, self.normalized)
        waits: list[PriorityWaits | None] = [None] * self.k
        for i in range(1, self.k + 1):
            if i == 1:
                waits[0] = priority_waits(n1[0], 0.0, 0.0, 1.0 / svc_n[0], math.inf, saturate)
            elif i == self.k:
                waits[-1] = priority_waits(0.0, n2[-1], 0.0, 1.0 / svc_n[-1], math.inf, saturate)
            else:
                waits[i - 1] = priority_waits(n1[i - 1], n2[i - 1], c[i - 1],
                                              1.0 / svc_n[i - 1], 1.0 / svc_c[i - 1], saturate)
        return _Snapshot(link, cs, svc_n, svc_c, waits)

    def update(self, x: np.ndarray) -> np.ndarray:
        """One Jacobi step; overloaded intermediate states saturate rather than fail."""
        k = self.k
        _, _, n1, n2, c = self.unpack(x)
        try:
            snap = self.snapshot(n1, n2, c)
            self.overload_streak = 0
        except UnstableError:
            self.overload_streak += 1
            if self.overload_streak >= OVERLOAD_STREAK:
                raise UnstableError(f"overloaded for {OVERLOAD_STREAK} consecutive iterations")
            snap = self.snapshot(n1, n2, c, saturate=True)
        inputs = input_rates(n1, n2, c, snap.link, self.scenario)
        f1, f2 = encoder_balance_step(inputs, snap.link, self.scenario)
        new_n1 = [0.0] * k
        new_n2 = [0.0] * k
        new_c = [0.0] * k
        new_n1[0] = f1[0]
        new_n2[-1] = f2[-1]
        for i in range(2, k):
            if self.force_native:
                new_n1[i - 1], new_n2[i - 1] = f1[i - 1], f2[i - 1]
                continue
            w = snap.waits[i - 1]
            split = queue_split_step(f1[i - 1], f2[i - 1], n1[i - 1], n2[i - 1], w.mu_n_seen, w.w_qn,
                                     saturate=True)
            self.clamped |= split.clamped
            new_n1[i - 1], new_n2[i - 1], new_c[i - 1] = split.lambda_n1, split.lambda_n2, split.lambda_c
        out = np.array(f1 + f2 + new_n1 + new_n2 + new_c)
        if self.symmetric:
            out = 0.5 * (out + self.mirror(out))
        return out


def node_waits(n1, n2, c, snap: _Snapshot) -> list[float]:
    """Rate-weighted sojourn per node over its native and coded classes."""
    out = []
    k = len(n1)
    for i in range(k):
        w = snap.waits[i]
        native = w.w_qn + snap.svc_n[i]
        lam_n = n1[i] + n2[i]
        lam_c = c[i]
        if lam_c <= 0 or i in (0, k - 1):
            out.append(native)
            continue
        coded = w.w_qc + snap.svc_c[i]
        out.append((lam_c * coded + lam_n * native) / (lam_c + lam_n))
    return out


def coding_delay(n1, n2, c, snap: _Snapshot, scenario: ChainScenario) -> tuple[float, float, float]:
    return aggregate_delay(node_waits(n1, n2, c, snap), scenario)


def analyze_coding(scenario: ChainScenario, *, normalized: bool = False, force_native: bool = False,
                   damping: float = 0.5, tol: float = 1e-9, max_iter: int = 100_000) -> PerformanceReport:
    """Solve the coding model; ``force_native`` pins the coded-queue rate to zero."""
    model = CodingModel(scenario, normalized=normalized, force_native=force_native)
    last = {"x": model.initial_state()}

    def update(x):
        last["x"] = x
        return model.update(x)

    k = scenario.k
    try:
        fp = solve(update, last["x"], damping=damping, tol=tol, max_iter=max_iter)
    except (UnstableError, DivergenceError):
        f1, f2, n1, n2, c = model.unpack(last["x"])
        return _unstable_report(scenario, f1, f2, n1, n2, c, 0, math.inf)
    f1, f2, n1, n2, c = model.unpack(fp.x)
    try:
        snap = model.snapshot(n1, n2, c)
    except UnstableError:
        return _unstable_report(scenario, f1, f2, n1, n2, c, fp.iterations, fp.residual)
    snap.inputs = input_rates(n1, n2, c, snap.link, scenario)
    waits = node_waits(n1, n2, c, snap)
    w1, w2, wavg = aggregate_delay(waits, scenario)
    nodes = []
    for i in range(k):
        mu_n = 1.0 / snap.svc_n[i]
        mu_c = 1.0 / snap.svc_c[i] if 0 < i < k - 1 else math.inf
        nodes.append(NodeRates(
            node=i + 1, lambda_f1=f1[i], lambda_f2=f2[i], lambda_n1=n1[i], lambda_n2=n2[i],
            lambda_c=c[i], lambda_in_n1=snap.inputs.n1[i], lambda_in_n2=snap.inputs.n2[i],
            lambda_in_c1=snap.inputs.c1[i], lambda_in_c2=snap.inputs.c2[i],
            mu_n=mu_n, mu_c=mu_c, mu_n_seen=snap.waits[i].mu_n_seen,
            rho_n=(n1[i] + n2[i]) / mu_n, rho_c=c[i] / mu_c if c[i] > 0 else 0.0,
            w_node=waits[i]))
    theta = f2[0] + f1[-1]
    stable = fp.converged and all(n.stable for n in nodes)
    if not stable:
        w1 = w2 = wavg = math.inf
    return PerformanceReport(Scheme.CODING, theta, w1, w2, wavg, tuple(nodes), stable,
                             fp.converged, fp.iterations, fp.residual)


def _unstable_report(scenario, f1, f2, n1, n2, c, iterations, residual) -> PerformanceReport:
    nodes = tuple(NodeRates(node=i + 1, lambda_f1=f1[i], lambda_f2=f2[i], lambda_n1=n1[i],
                            lambda_n2=n2[i], lambda_c=c[i], rho_n=1.0) for i in range(scenario.k))
    return PerformanceReport(Scheme.CODING, f2[0] + f1[-1], math.inf, math.inf, math.inf, nodes,
                             False, False, iterations, residual)
