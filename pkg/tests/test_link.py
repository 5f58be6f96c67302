import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncchain import PhyMacParams
from ncchain.link import (LinkState, ModelRangeError, busy_probability, decode_probability,
                          drop_probability, link_state, neighbors, success_probability)


def test_busy_probability_examples():
    assert busy_probability(50, 2e-6) == pytest.approx(2.0e-4)
    assert busy_probability(0, 2e-6) == 0.0
    with pytest.raises(ModelRangeError):
        busy_probability(1e6, 1e-6)


def test_busy_probability_poisson_window_monte_carlo():
    # chance a Poisson(100/s) process fires in a 4 us window, 10^7 trials
    lam, delta, n = 100.0, 2e-6, 10_000_000
    rng = np.random.default_rng(7)
    hits = int((rng.poisson(lam * 2 * delta, size=n) > 0).sum())
    exact = -math.expm1(-2 * delta * lam)
    sigma = math.sqrt(exact * (1 - exact) / n)
    assert abs(hits / n - exact) < 3 * sigma
    assert busy_probability(lam, delta) == pytest.approx(4.0e-4)
    assert abs(busy_probability(lam, delta) - hits / n) < 3 * sigma + abs(4e-4 - exact)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 2e5), st.floats(1e-9, 2e-6))
def test_busy_probability_first_order(lam, delta):
    h = 2 * delta * lam
    if h >= 1:
        return
    assert abs(busy_probability(lam, delta) - (-math.expm1(-h))) <= h * h / 2 + 1e-18


def test_success_probability_examples():
    ideal = PhyMacParams(bit_error_rate=0.0)
    assert success_probability(1, 2, [0, 0, 0], ideal) == 1.0
    assert success_probability(1, 2, [0, 0, 0], PhyMacParams()) == pytest.approx(0.984)
    rates = [0, 0, 50, 50, 0]
    assert success_probability(2, 3, rates, PhyMacParams()) == pytest.approx(0.984 * (1 - 2e-4) ** 2, rel=1e-12)
    assert success_probability(2, 3, rates, PhyMacParams()) == pytest.approx(0.98361, abs=1e-5)
    with pytest.raises(ValueError):
        success_probability(1, 3, rates, PhyMacParams())


def test_drop_probability():
    assert drop_probability(0.5, 7) == pytest.approx(7.8125e-3)
    assert drop_probability(1.0, 7) == 0.0
    assert drop_probability(0.9, 1) == pytest.approx(0.1)


def test_decode_probability():
    pd = np.zeros((3, 3))
    pd[2, 1] = 0.2
    link = LinkState(np.zeros((3, 3)), pd, np.zeros((3, 3)))
    assert decode_probability(1, 2, link, chain=True) == 1.0
    assert decode_probability(1, 2, link, chain=False) == pytest.approx(0.8)
    assert decode_probability(3, 2, link, chain=False) == 1.0


def test_neighbors():
    assert neighbors(1, 5, 2) == [2, 3]
    assert neighbors(3, 5, 2) == [1, 2, 4, 5]
    assert neighbors(5, 5, 1) == [4]


def test_nonadjacent_entries_zero_and_symmetric():
    link = link_state([20, 45, 40, 45, 20], PhyMacParams(), 7)
    for i in range(5):
        for j in range(5):
            if abs(i - j) != 1:
                assert link.p[i, j] == 0 and link.p_drop[i, j] == 0
    for i in range(1, 5):
        assert link.success(i, i + 1) == pytest.approx(link.success(6 - i, 5 - i), rel=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 500), min_size=5, max_size=5), st.integers(0, 4), st.floats(0, 200),
       st.floats(0, 1e-5), st.floats(0, 1e-5))
def test_success_monotone(rates, which, bump, ber, ber_bump):
    phy = PhyMacParams(bit_error_rate=ber)
    more = list(rates)
    more[which] += bump
    worse = PhyMacParams(bit_error_rate=ber + ber_bump)
    for i in range(1, 5):
        base = success_probability(i, i + 1, rates, phy)
        assert success_probability(i, i + 1, more, phy) <= base
        assert success_probability(i, i + 1, rates, worse) <= base
