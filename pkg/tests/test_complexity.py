import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from samplereuse import Constant, ReuseLedger, make_stream, run
from samplereuse.complexity import (
    corollary_bound,
    expected_fresh,
    expected_total,
    reuse_cost_factor,
    scalar_gap,
    sequence_gap,
    theorem_bound,
    trial_statistics,
)

from conftest import ball_chain, volume_chain


def test_expected_fresh_examples():
    assert expected_fresh([1, 2, 4], 100).tolist() == [50.0, 50.0, 100.0]
    assert expected_total([1, 2, 4], 100) == pytest.approx(200.0)
    assert expected_total([3.0] * 10, 100) == pytest.approx(100.0)
    assert expected_fresh([5.0], 7).tolist() == [7.0]
    with pytest.raises(ValueError):
        expected_fresh([2, 1], 10)
    with pytest.raises(ValueError):
        expected_fresh([0, 1], 10)


def test_bound_examples():
    assert theorem_bound(1, 4, 100) == pytest.approx(238.6294361119891, rel=1e-12)
    assert corollary_bound(5, 1, 2, 2000) == pytest.approx(8931.471805599454, rel=1e-12)
    assert theorem_bound(3, 3, 50) == 50
    with pytest.raises(ValueError):
        theorem_bound(4, 1, 10)
    with pytest.raises(ValueError):
        corollary_bound(0, 1, 2, 10)


def test_geometric_chain_values():
    radii = np.geomspace(1, 2, 50)
    assert reuse_cost_factor(radii**5) == pytest.approx(50 - 49 * 2 ** (-5 / 49), rel=1e-12)
    assert reuse_cost_factor(np.geomspace(1, 2, 100) ** 5) == pytest.approx(4.405774379589133, rel=1e-12)


def test_cost_independent_of_chain_length():
    bound = 1 + 5 * math.log(2)
    factors = [reuse_cost_factor(np.geomspace(1, 2, m) ** 5) for m in (2, 10, 100, 1000, 100_000)]
    assert all(f < bound for f in factors)
    assert np.all(np.diff(factors) > 0)
    assert factors[-1] == pytest.approx(bound, rel=1e-4)


@given(st.integers(1, 20), st.floats(0.1, 10.0), st.floats(1.0, 5.0))
def test_corollary_equals_theorem_on_scaled_shapes(d, rmin, factor):
    rmax = rmin * factor
    assert corollary_bound(d, rmin, rmax, 1.0) == pytest.approx(theorem_bound(rmin**d, rmax**d, 1.0), rel=1e-9)


@given(st.floats(1.0 + 1e-4, 1e6))
def test_scalar_inequality(x):
    assert scalar_gap(x) > 0


@settings(max_examples=200)
@given(st.lists(st.floats(1e-3, 10.0), min_size=1, max_size=50), st.floats(0.01, 100.0))
def test_sequence_inequality(steps, start):
    r = start + np.concatenate([[0.0], np.cumsum(steps)])
    assert sequence_gap(r) > 0
    assert reuse_cost_factor(r) < 1 + math.log(r[-1] / r[0])


def _ledgers(chain, N, T, seed):
    return [run(chain, N, Constant(True), make_stream(seed, t)).ledger for t in range(T)]


def test_trial_statistics_matches_expectation():
    chain = volume_chain([1.0, 2.0, 4.0])
    rep = trial_statistics(_ledgers(chain, 100, 300, 21))
    assert rep.expected_total == pytest.approx(200.0)
    assert rep.within()
    assert rep.truncated_trials == 0
    assert rep.theorem_bound == pytest.approx(theorem_bound(1, 4, 100))
    assert rep.quantiles[0.05] <= rep.quantiles[0.5] <= rep.quantiles[0.95]
    rows = list(rep.rows())
    assert rows[-1][0] == "total" and rows[2][4] == "exact"


def test_trial_statistics_exact_match_with_no_spread():
    chain = ball_chain([1.0], dim=2)
    rep = trial_statistics(_ledgers(chain, 10, 5, 22))
    assert rep.exact_match and rep.within()
    assert math.isnan(rep.z_total)


def test_trial_statistics_counts_truncated_trials():
    logv = (0.0, math.log(2.0))
    led = [
        ReuseLedger(10, (5, 10), (5, 0), (0, 0), logv),
        ReuseLedger(10, (3, 10), (7, 0), (0, 0), logv),
        ReuseLedger(10, (0, 10), (10, 0), (2, 0), logv),
    ]
    rep = trial_statistics(led)
    assert rep.truncated_trials == 1 and rep.trials == 3
    assert rep.mean.tolist() == [4.0, 10.0]


def test_trial_statistics_rejects_mixed_runs():
    a = ReuseLedger(10, (5, 10), (5, 0), (0, 0), (0.0, 1.0))
    b = ReuseLedger(20, (5, 20), (15, 0), (0, 0), (0.0, 1.0))
    with pytest.raises(ValueError):
        trial_statistics([a, b])
    with pytest.raises(ValueError):
        trial_statistics([a])
