"""Per-link success, drop and decode probabilities on the chain.

Nodes are numbered 1..k. Per-node attempt rates are passed as a sequence
indexed 0..k-1; a source's attempt rate must already count only its own
outgoing flow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import PhyMacParams


class ModelRangeError(ValueError):
    """Input falls outside the range where the analytic approximations hold."""


def busy_probability(lambda_x: float, delta: float) -> float:
    """Chance that a Poisson(lambda_x) sender starts inside the +-delta vulnerable window."""
    h = 2.0 * delta * lambda_x
    if h >= 1.0:
        raise ModelRangeError(f"2*delta*lambda = {h} >= 1")
    return h


def within(i: int, j: int, hops: int) -> bool:
    return abs(i - j) <= hops


def neighbors(i: int, k: int, hops: int) -> list[int]:
    """Nodes within ``hops`` of node i, excluding i."""
    return [x for x in range(max(1, i - hops), min(k, i + hops) + 1) if x != i]


def interference_set(j: int, k: int, hops: int) -> list[int]:
    """I_j: nodes able to corrupt a reception at j, including j itself."""
    return [j] + neighbors(j, k, hops)


def success_probability(i: int, j: int, rates: Sequence[float], phy: PhyMacParams) -> float:
    if abs(i - j) != 1:
        raise ValueError(f"nodes {i} and {j} are not adjacent")
    k = len(rates)
    p = 1.0 - phy.packet_error
    for x in interference_set(j, k, phy.interference_hops):
        if x != i:
            p *= 1.0 - busy_probability(rates[x - 1], phy.delta)
    return p


def drop_probability(p: float, beta: int) -> float:
    return (1.0 - p) ** beta


def decode_probability(i: int, j: int, link: "LinkState", chain: bool = True) -> float:
    """Chance a coded packet sent i -> j can be decoded at j.

    On a chain the partner packet always came from j, so decoding never fails.
    Otherwise j must already hold the partner, which travelled the opposite
    link into j from the node on its far side.
    """
    if abs(i - j) != 1:
        raise ValueError(f"nodes {i} and {j} are not adjacent")
    if chain:
        return 1.0
    other = 2 * j - i
    if not 1 <= other <= link.k:
        return 1.0
    return 1.0 - link.drop(other, j)


@dataclass(frozen=True)
class LinkState:
    """Matrices indexed [i-1, j-1]; zero for non-adjacent pairs."""

    p: np.ndarray
    p_drop: np.ndarray
    p_decode: np.ndarray

    @property
    def k(self) -> int:
        return self.p.shape[0]

    def success(self, i: int, j: int) -> float:
        return float(self.p[i - 1, j - 1])

    def drop(self, i: int, j: int) -> float:
        return float(self.p_drop[i - 1, j - 1])

    def decode(self, i: int, j: int) -> float:
        return float(self.p_decode[i - 1, j - 1])


def link_state(rates: Sequence[float], phy: PhyMacParams, beta: int, chain: bool = True) -> LinkState:
    k = len(rates)
    p = np.zeros((k, k))
    pd = np.zeros((k, k))
    for i in range(1, k + 1):
        for j in (i - 1, i + 1):
            if 1 <= j <= k:
                p[i - 1, j - 1] = success_probability(i, j, rates, phy)
                pd[i - 1, j - 1] = drop_probability(p[i - 1, j - 1], beta)
    partial = LinkState(p, pd, np.zeros((k, k)))
    dec = np.zeros((k, k))
    for i in range(1, k + 1):
        for j in (i - 1, i + 1):
            if 1 <= j <= k:
                dec[i - 1, j - 1] = decode_probability(i, j, partial, chain)
    return LinkState(p, pd, dec)
