import math

import numpy as np
import pytest

from centeq.dynsys import cat_map
from centeq.pressure import (
    NetCache, PartitionEntry, PartitionSumSeries, fit_pressure, log_partition_sum, multiplicativity_check,
    partition_series, partition_sum, pressure_estimate, scale_robustness_check, variational_check,
)
from centeq.quasicocycle import TrigPotential, birkhoff, zero_cocycle

H = math.log((3 + math.sqrt(5)) / 2)
# log Z_n of the zero cocycle on the default shuffled nets at eps = 0.1 (seed 0)
LOG_Z_01 = {1: 4.127134385045092, 5: 7.778211474512493, 10: 12.58762408759032}


@pytest.fixture(scope="module")
def cat():
    return cat_map()


@pytest.fixture(scope="module")
def nets(cat):
    return NetCache(cat)


def series_of(values, eps=0.1):
    return PartitionSumSeries([PartitionEntry(n, eps, v, 1) for n, v in values.items()])


def test_log_partition_sum_matches_naive_sum():
    vals = np.array([0.1, -0.3, 2.0])

    class Q:
        def __call__(self, pts, n):
            return vals * n

    assert log_partition_sum(Q(), np.zeros((3, 2)), 2) == pytest.approx(math.log(np.exp(2 * vals).sum()))
    with pytest.raises(ValueError):
        log_partition_sum(Q(), np.zeros((0, 2)), 2)


def test_log_partition_sum_survives_overflow(cat):
    qc = birkhoff(cat, 1000.0)
    assert log_partition_sum(qc, np.zeros((4, 2)), 10) == pytest.approx(10_000 + math.log(4))


def test_zero_cocycle_partition_sum_counts_net(cat, nets):
    net = nets.get(4, 0.1)
    assert partition_sum(cat, zero_cocycle(cat), net) == pytest.approx(len(net))


def test_cached_nets_are_reused(nets):
    assert nets.get(3, 0.1) is nets.get(3, 0.1)


def test_frozen_partition_series(cat, nets):
    table = partition_series(cat, zero_cocycle(cat), 0.1, sorted(LOG_Z_01), nets).table()
    for n, v in LOG_Z_01.items():
        assert table[n] == pytest.approx(v, abs=1e-12)


def test_entropy_estimate(cat, nets):
    est = pressure_estimate(cat, eps=0.1, n_range=range(3, 9), nets=nets)
    assert abs(est.P / H - 1) < 0.02
    assert not est.unstable
    assert est.window == (3, 8)
    assert est.eps == 0.1


def test_constant_shift_adds_to_pressure(cat, nets):
    base = pressure_estimate(cat, eps=0.1, n_range=range(3, 9), nets=nets)
    shifted = pressure_estimate(cat, birkhoff(cat, 0.3), eps=0.1, n_range=range(3, 9), nets=nets)
    assert shifted.P - base.P == pytest.approx(0.3, abs=1e-9)


def test_variational_inequality_for_haar(cat, nets):
    phi = TrigPotential([[1, 0], [1, 1]], [0.2, 0.0], [0.0, 0.1])
    est = pressure_estimate(cat, birkhoff(cat, phi), eps=0.1, n_range=range(3, 9), nets=nets)
    rep = variational_check(cat, birkhoff(cat, phi), "haar", est.P)
    assert rep.passed
    assert rep.integral == 0 and rep.entropy == pytest.approx(H)
    assert est.P >= rep.value - 0.02


def test_fit_is_exact_on_a_line():
    est = fit_pressure(series_of({n: 0.7 * n + 1.5 for n in range(1, 8)}))
    assert est.P == pytest.approx(0.7) and est.intercept == pytest.approx(1.5)
    assert est.residual < 1e-12 and not est.unstable


def test_fit_flags_wild_series():
    est = fit_pressure(series_of({1: 0.0, 2: 5.0, 3: 0.0, 4: 5.0, 5: 0.1}))
    assert est.unstable
    with pytest.raises(ValueError):
        fit_pressure(series_of({1: 0.0, 2: 1.0, 3: 2.0}))


def test_series_rejects_mixed_eps():
    s = PartitionSumSeries([PartitionEntry(1, 0.1, 0.0, 1), PartitionEntry(2, 0.2, 1.0, 1)])
    with pytest.raises(ValueError, match="mixes"):
        s.eps


def test_multiplicativity_band_on_exactly_multiplicative_series():
    rep = multiplicativity_check(series_of({n: 0.9 * n + 0.2 for n in range(1, 11)}))
    assert rep.passed
    assert rep.band[0] == pytest.approx(math.exp(-0.2)) == pytest.approx(rep.band[1])
    assert (5, 5) in rep.holdout_ratios and (4, 4) in rep.fit_ratios


def test_multiplicativity_detects_drift():
    rep = multiplicativity_check(series_of({n: 0.9 * n + 0.05 * n * n for n in range(1, 11)}))
    assert not rep.passed and rep.failures


def test_multiplicativity_of_net_series_with_slack(cat, nets):
    s = partition_series(cat, zero_cocycle(cat), 0.1, range(1, 11), nets)
    rep = multiplicativity_check(s, slack=2.0)
    assert rep.passed
    assert 0 < rep.band[0] <= rep.band[1] < 1


def test_scale_robustness(cat, nets):
    rep = scale_robustness_check(cat, zero_cocycle(cat), 0.08, 0.12, range(3, 9), nets=nets)
    assert rep.passed
    assert abs(rep.P_fine - rep.P_coarse) < 0.01
    assert all(v > 0 for v in rep.log_ratios.values())
    with pytest.raises(ValueError):
        scale_robustness_check(cat, zero_cocycle(cat), 0.2, 0.1, range(3, 9))
