"""DCF access delay with clock freezing, per-attempt service times and mean service rates."""

from __future__ import annotations

import enum
import math

from .model import PhyMacParams, derived_times

SERIES_REL_TOL = 1e-15
SERIES_MAX_TERMS = 10_000


class TxClass(str, enum.Enum):
    NATIVE = "native"
    CODED = "coded"


def contention_window(m: int, phy: PhyMacParams) -> int:
    """Window size (slots) for the m-th transmission of a packet, capped at CW_max."""
    return min(2 ** (m - 1) * phy.cw_min, phy.cw_max)


def t_counter(m: int, phy: PhyMacParams, beta: int | None = None) -> float:
    """DIFS plus the mean uniform back-off for the m-th transmission."""
    limit = phy.beta if beta is None else beta
    if not 1 <= m <= max(limit, 1):
        raise ValueError(f"transmission index {m} outside 1..{limit}")
    return phy.difs + phy.slot * (contention_window(m, phy) - 1) / 2.0


def expected_backoff(m: int, lambda_cs: float, phy: PhyMacParams) -> float:
    """Upper bound on DIFS + back-off time when neighbours freeze the counter.

    ``lambda_cs`` is the summed attempt rate of the nodes in carrier-sense range.
    """
    tc = t_counter(m, phy, beta=max(m, phy.beta))
    tt = derived_times(phy).t_trans
    lam = lambda_cs
    busy = -math.expm1(-lam * tt)
    return tc * math.exp(-lam * tc) + busy * (tc * math.exp(lam * tt) + tt * math.exp(2 * lam * tt))


def expected_backoff_series(m: int, lambda_cs: float, phy: PhyMacParams) -> float:
    """Term-by-term sum of the freezing series; the reference for :func:`expected_backoff`."""
    tc = t_counter(m, phy, beta=max(m, phy.beta))
    tt = derived_times(phy).t_trans
    q = -math.expm1(-lambda_cs * tt)
    total = tc * math.exp(-lambda_cs * tc)
    qi = 1.0
    for i in range(1, SERIES_MAX_TERMS + 1):
        qi *= q
        term = (tc + i * tt) * qi
        total += term
        if term <= SERIES_REL_TOL * total:
            break
    return total


def per_attempt_service_time(m: int, tx_class: TxClass, lambda_cs: float, phy: PhyMacParams) -> float:
    """Channel-holding time of the m-th attempt; coded frames wait for two ACKs."""
    times = derived_times(phy)
    handshake = phy.sifs + times.t_ack + phy.delta
    acks = 2 if TxClass(tx_class) is TxClass.CODED else 1
    return expected_backoff(m, lambda_cs, phy) + times.t_data + phy.delta + acks * handshake


def mean_service_time(p: float, tx_class: TxClass, lambda_cs: float, phy: PhyMacParams,
                      beta: int, normalized: bool = False) -> float:
    """Expected time to clear the head-of-line packet over at most ``beta`` attempts.

    The branch weights p(1-p)^(m-1) omit the drop branch. ``normalized=True``
    rescales them by 1-(1-p)^beta so they sum to one.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"success probability {p} outside (0, 1]")
    ts = [per_attempt_service_time(m, tx_class, lambda_cs, phy) for m in range(1, beta + 1)]
    total = 0.0
    cumulative = 0.0
    for m in range(1, beta + 1):
        cumulative += ts[m - 1]
        total += p * (1.0 - p) ** (m - 1) * cumulative
    if normalized:
        total /= 1.0 - (1.0 - p) ** beta
    return total


def mean_service_rate(p: float, tx_class: TxClass, lambda_cs: float, phy: PhyMacParams,
                      beta: int | None = None, normalized: bool = False) -> float:
    beta = phy.beta if beta is None else beta
    return 1.0 / mean_service_time(p, tx_class, lambda_cs, phy, beta, normalized)
