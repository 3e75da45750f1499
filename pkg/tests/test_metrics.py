import math
import random
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rlncdtn.metrics import (BatchRecord, BufferIndicator, DensityVector, RunMetrics,
                             chernoff_bound, density_entropy, empirical_exceedance, entropy,
                             expected_efficient_fraction, indicator_densities, markov_bound,
                             measure_densities, seeding_expectation, seeding_failure_bounds,
                             simplex_grid_argmax, sliding_efficiency, time_average)


def test_entropy_examples():
    assert entropy([0.25] * 4) == pytest.approx(1.0)
    assert entropy([1.0, 0.0, 0.0]) == 0.0
    assert entropy([0.75, 0.25]) == pytest.approx(0.8113, abs=1e-4)
    with pytest.raises(ValueError):
        entropy([1.0])
    with pytest.raises(ValueError):
        entropy([0.5, 0.6])
    with pytest.raises(ValueError):
        entropy([1.5, -0.5])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 50), min_size=2, max_size=12).filter(lambda m: sum(m) > 0))
def test_entropy_bounds_and_maximum(m):
    dv = DensityVector(0.0, m, 51)
    h, degenerate = density_entropy(dv)
    assert not degenerate
    assert -1e-12 <= h <= 1 + 1e-12
    nz = [c for c in m if c]
    all_equal = len(nz) == len(m) and len(set(nz)) == 1
    assert (abs(h - 1) < 1e-9) == all_equal
    assert math.isclose(sum(dv.rho_norm), 1.0)


def test_density_vector_degenerate_and_validation():
    dv = DensityVector(0.0, [0, 0, 0], 10)
    assert density_entropy(dv) == (0.0, True)
    assert dv.rho_norm == [0.0, 0.0, 0.0]
    assert DensityVector(0.0, [9, 3], 10).rho == [1.0, 1 / 3]
    with pytest.raises(ValueError):
        DensityVector(0.0, [10], 10)


def test_measure_densities_reads_counts():
    state = SimpleNamespace(time=3.0, counts=[1, 2, 0], n_nodes=11)
    dv = measure_densities(state)
    assert dv.m == [1, 2, 0] and dv.t == 3.0 and dv.rho == [0.1, 0.2, 0.0]


def test_efficiency_objective_examples():
    assert expected_efficient_fraction([0.5, 0.5]) == 0.5
    assert expected_efficient_fraction([0.75, 0.25]) == 0.375
    assert expected_efficient_fraction([1.0, 0, 0]) == 0.0


@pytest.mark.parametrize("nu", [2, 3])
def test_grid_argmax_is_uniform(nu):
    best, arg = simplex_grid_argmax(nu, 0.01)
    if nu == 2:
        assert arg == [(0.5, 0.5)] and best == pytest.approx(0.5)
    else:
        # 1/3 is not on the 0.01 grid; the maximisers are its nearest grid points
        assert all(max(abs(x - 1 / 3) for x in p) <= 0.01 + 1e-12 for p in arg)
        assert best == pytest.approx(1 - (0.33 ** 2 + 0.33 ** 2 + 0.34 ** 2))
    with pytest.raises(ValueError):
        simplex_grid_argmax(2, 0.3)


def test_indicator_densities():
    assert sorted(indicator_densities([0b1, 0b1, 0b10, 0b11])) == [0.25, 0.25, 0.5]
    assert indicator_densities([]) == []
    assert BufferIndicator(3, 0b1011).occupancy == 3


def _outcomes(times, innov):
    return [SimpleNamespace(time=t, n_innovative=k) for t, k in zip(times, innov)]


def test_sliding_efficiency():
    times = [float(i + 1) for i in range(120)]
    full = sliding_efficiency(_outcomes(times, [2] * 120), window=50)
    # after the first window, each window spans exactly 50 time units
    assert all(v == pytest.approx(2 * 50 / 50) for t, v in full[50:])
    none = sliding_efficiency(_outcomes(times, [0] * 120), window=50)
    assert all(v == 0 for _, v in none)
    with pytest.raises(ValueError):
        sliding_efficiency([], window=0)


def test_time_average_piecewise_constant():
    series = [(0.0, 1.0), (2.0, 3.0)]
    assert time_average(series, 0.0, 4.0) == pytest.approx(2.0)
    assert time_average(series, 1.0, 3.0) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        time_average(series, 1.0, 1.0)


def test_seeding_closed_forms():
    assert seeding_expectation(10, 1) == 1.0
    assert seeding_failure_bounds(10, 1) == [0.0]
    e = seeding_expectation(100, 10)
    assert e == pytest.approx(sum(100 / (101 - i) for i in range(1, 11)))
    assert e == pytest.approx(10.48, abs=0.01)
    pi = seeding_failure_bounds(100, 10)
    # pi_2 = (1/100) * (2*...*9)/100^8 = 9!/100^9 = 3.6288e-13
    assert pi[1] == pytest.approx(math.factorial(9) / 100 ** 9)
    assert pi[-1] == pytest.approx(9 / 100)
    assert sum(pi) == pytest.approx(0.0977, abs=1e-4)
    with pytest.raises(ValueError):
        seeding_expectation(5, 6)


def test_failure_bound_at_half_population():
    # The largest term is the last one, (nu-1)/N, an empty product.
    pi = seeding_failure_bounds(100, 50)
    assert max(pi) == pytest.approx(0.49)
    assert pi.index(max(pi)) == 49


def test_markov_examples():
    assert markov_bound(200, 2000) == pytest.approx(0.1)
    assert markov_bound(200, 150) == 1.0
    with pytest.raises(ValueError):
        markov_bound(1, 0)


def test_chernoff_properties():
    rng = np.random.default_rng(0)
    x = rng.gamma(20, 2.0, size=2000)
    m = x.mean()
    for tl in np.linspace(1.25 * m, 3 * m, 8):
        c = chernoff_bound(x, tl)
        assert 0 <= c <= 1
        assert empirical_exceedance(x, tl) <= c + 1e-12
        assert c <= markov_bound(m, tl)
    assert chernoff_bound([0.0, 0.0], 1.0) == 0.0
    with pytest.raises(ValueError):
        chernoff_bound([], 1.0)
    with pytest.raises(ValueError):
        empirical_exceedance([], 1.0)


def test_chernoff_above_markov_just_past_mean():
    # Near the mean the optimal Chernoff exponent is tiny and its bound tends to 1,
    # while Markov is only slightly below 1: Chernoff <= Markov needs Tl well above the mean.
    x = np.random.default_rng(1).exponential(1.0, size=5000) + 10
    m = x.mean()
    assert chernoff_bound(x, 1.01 * m) > markov_bound(m, 1.01 * m)


def test_run_metrics_identity():
    b1 = BatchRecord(0, origin=0.0, prop_start=0.0, deadline=10.0, completion=8.0,
                     decode_times={1: 5.0, 2: 8.0})
    b2 = BatchRecord(1, origin=10.0, prop_start=10.0, deadline=20.0,
                     decode_times={1: 15.0})
    rm = RunMetrics(nu=4, n_destinations=2, elapsed=20.0, batches=[b1, b2])
    assert rm.delivered == 3
    assert rm.delivery_ratio == 0.75
    assert rm.throughput * rm.elapsed == pytest.approx(3 * 4 / 2)
    assert rm.delay == pytest.approx((5 + 8 + 5) / 3)
    assert rm.propagation_times == [8.0]
    s = rm.summary()
    assert s["batches"] == 2 and math.isnan(s["deadline"])
