import itertools

import pytest

from ncchain import PhyMacParams, derived_times
from ncchain.dcf import (TxClass, expected_backoff, expected_backoff_series, mean_service_rate,
                         mean_service_time, per_attempt_service_time, t_counter)

PHY = PhyMacParams()


@pytest.mark.parametrize("m,expected", [(1, 360e-6), (2, 680e-6), (7, 10.28e-3)])
def test_t_counter(m, expected):
    assert t_counter(m, PHY) == pytest.approx(expected, rel=1e-12)


def test_t_counter_range():
    with pytest.raises(ValueError):
        t_counter(0, PHY)
    with pytest.raises(ValueError):
        t_counter(8, PHY)


def test_backoff_idle_channel_is_counter():
    for m in range(1, 8):
        assert expected_backoff(m, 0.0, PHY) == t_counter(m, PHY)


def test_backoff_series_grid():
    tt = derived_times(PHY).t_trans
    for m, x in itertools.product(range(1, 8), [0.0, 0.05, 0.15, 0.3, 0.5]):
        lam = x / tt
        series = expected_backoff_series(m, lam, PHY)
        assert expected_backoff(m, lam, PHY) == pytest.approx(series, rel=1e-9)


def test_backoff_monotone():
    assert expected_backoff(1, 80, PHY) > expected_backoff(1, 40, PHY)
    values = [expected_backoff(m, 40, PHY) for m in range(1, 8)]
    # strictly increasing until the window reaches CW_max at m = 6, flat after
    assert all(a < b for a, b in zip(values[:6], values[1:6]))
    assert values[5] == values[6]
    wide = PhyMacParams(cw_max=4096)
    values = [expected_backoff(m, 40, wide) for m in range(1, 8)]
    assert all(a < b for a, b in zip(values, values[1:]))


def test_per_attempt_times():
    native = per_attempt_service_time(1, TxClass.NATIVE, 0.0, PHY)
    coded = per_attempt_service_time(1, TxClass.CODED, 0.0, PHY)
    assert native == pytest.approx(4.430e-3, rel=1e-12)
    assert coded == pytest.approx(4.498e-3, rel=1e-12)
    for m, lam in ((3, 20.0), (6, 90.0)):
        diff = per_attempt_service_time(m, "coded", lam, PHY) - per_attempt_service_time(m, "native", lam, PHY)
        assert diff == pytest.approx(68e-6, rel=1e-9)


def test_service_rate_perfect_link():
    assert mean_service_rate(1.0, TxClass.NATIVE, 30.0, PHY) == pytest.approx(
        1 / per_attempt_service_time(1, TxClass.NATIVE, 30.0, PHY))


def test_service_time_hand_summed():
    # exact rational sum of the branch series at p = 0.9, beta = 7, idle channel
    assert mean_service_time(0.9, TxClass.NATIVE, 0.0, PHY, 7) == pytest.approx(4.966644933e-3, rel=1e-12)


def test_service_time_single_attempt_literal():
    ts1 = per_attempt_service_time(1, TxClass.NATIVE, 10.0, PHY)
    assert mean_service_time(0.7, TxClass.NATIVE, 10.0, PHY, 1) == pytest.approx(0.7 * ts1)
    assert mean_service_time(0.7, TxClass.NATIVE, 10.0, PHY, 1, normalized=True) == pytest.approx(ts1)


def test_service_time_zero_p():
    with pytest.raises(ValueError):
        mean_service_time(0.0, TxClass.NATIVE, 0.0, PHY, 7)


def test_service_time_monotone_in_p():
    ps = [0.5 + 0.05 * i for i in range(11)]
    literal = [mean_service_time(p, TxClass.NATIVE, 20.0, PHY, 7) for p in ps]
    assert all(a >= b for a, b in zip(literal, literal[1:]))
    ps = [0.05 * i for i in range(1, 21)]
    norm = [mean_service_time(p, TxClass.NATIVE, 20.0, PHY, 7, normalized=True) for p in ps]
    assert all(a >= b for a, b in zip(norm, norm[1:]))
