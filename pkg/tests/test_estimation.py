import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq
from scipy.stats import binom

from samplereuse import (
    BELOW_GRID,
    Ball,
    Donut,
    InnerBall,
    RobustnessCurve,
    binomial_ci,
    build_chain,
    curve_infimum,
    donut_estimates,
    donut_reconstruct,
    estimate_curve,
    make_stream,
    margin,
    naive_run,
    run,
    variance_ratio,
)
from samplereuse.estimation import direct_variance, donut_variance, pool_curves


def cdf_root_interval(k, N, level):
    """Exact interval by inverting the binomial tails directly."""
    a = (1 - level) / 2
    lo = 0.0 if k == 0 else brentq(lambda p: binom.sf(k - 1, N, p) - a, 1e-15, 1 - 1e-15, xtol=1e-15)
    hi = 1.0 if k == N else brentq(lambda p: binom.cdf(k, N, p) - a, 1e-15, 1 - 1e-15, xtol=1e-15)
    return lo, hi


# frozen from cdf_root_interval
CI_CASES = [
    (0, 10, (0.0, 0.3084971078187629)),
    (10, 10, (0.6915028921812371, 1.0)),
    (5, 10, (0.18708602844739858, 0.8129139715526014)),
]


@pytest.mark.parametrize("k,N,expected", CI_CASES)
def test_clopper_pearson_examples(k, N, expected):
    lo, hi = binomial_ci(k, N, 0.95)
    assert lo == pytest.approx(expected[0], abs=1e-10)
    assert hi == pytest.approx(expected[1], abs=1e-10)


def test_clopper_pearson_against_tail_inversion():
    for N in (1, 7, 50, 333):
        for k in np.unique(np.linspace(0, N, 9).astype(int)):
            for level in (0.9, 0.99):
                ref = cdf_root_interval(int(k), N, level)
                assert binomial_ci(int(k), N, level) == pytest.approx(ref, abs=1e-9)


def test_clopper_pearson_coverage():
    rng = np.random.default_rng(101)
    k = rng.binomial(50, 0.3, size=10_000)
    lo, hi = binomial_ci(k, 50, 0.95)
    assert np.mean((lo <= 0.3) & (0.3 <= hi)) >= 0.94


def test_ci_argument_checks():
    with pytest.raises(ValueError):
        binomial_ci(11, 10)
    with pytest.raises(ValueError):
        binomial_ci(1, 10, level=1.0)


def test_estimate_curve_from_outcomes():
    curve = estimate_curve([[True, True, False, True], [True, False, False, False]], [1.0, 2.0])
    assert curve.estimate.tolist() == [0.75, 0.25]
    with pytest.raises(ValueError):
        estimate_curve([[True, None]], [1.0])
    with pytest.raises(ValueError):
        estimate_curve([[]], [1.0])


def test_pool_curves_sums_counts():
    a = RobustnessCurve([1.0, 2.0], [3, 1], 4)
    b = RobustnessCurve([1.0, 2.0], [4, 2], 4)
    pooled = pool_curves([a, b])
    assert pooled.k.tolist() == [7, 3] and pooled.N.tolist() == [8, 8]


def test_margin_examples():
    curve = RobustnessCurve([1.0, 2.0, 3.0, 4.0], [100, 99, 96, 80], 100)
    assert margin(curve, 0.0) == 1.0
    assert margin(curve, 0.05) == 3.0
    assert margin(curve, 0.5) == 4.0
    low = RobustnessCurve([1.0, 2.0], [80, 70], 100)
    assert margin(low, 0.05) is BELOW_GRID
    assert str(BELOW_GRID) == "below_grid"


def test_conservative_margin_is_smaller():
    curve = RobustnessCurve([1.0, 2.0, 3.0], [100, 97, 95], 100)
    assert margin(curve, 0.05) == 3.0
    assert margin(curve, 0.05, conservative=True) == 1.0


def test_margin_takes_largest_qualifying_radius():
    # the curve dips below the threshold and recovers; the largest radius wins
    curve = RobustnessCurve([1.0, 2.0, 3.0], [100, 90, 100], 100)
    assert margin(curve, 0.05) == 3.0


def test_curve_infimum():
    curve = RobustnessCurve([1.0, 2.0, 3.0], [100, 90, 95], 100)
    assert curve_infimum(curve, 2.5) == 0.9
    assert curve_infimum(curve, 1.0) == 1.0
    with pytest.raises(ValueError):
        curve_infimum(curve, 0.5)


@settings(max_examples=50)
@given(
    st.lists(st.integers(0, 100), min_size=1, max_size=10),
    st.floats(0.0, 0.9),
    st.floats(0.1, 10.0),
)
def test_margin_invariant_under_monotone_relabelling(k, eps, scale):
    labels = np.arange(1, len(k) + 1, dtype=float)
    a = margin(RobustnessCurve(labels, k, 100), eps)
    b = margin(RobustnessCurve(scale * labels**2, k, 100), eps)
    if a is BELOW_GRID:
        assert b is BELOW_GRID
    else:
        assert b == pytest.approx(scale * a**2)


def test_donut_reconstruct_examples():
    assert donut_reconstruct(0.5, 3.0, 1.0, 4.0) == pytest.approx(0.625)
    assert donut_reconstruct(1.0, 3.0, 1.0, 4.0) == 1.0
    assert donut_reconstruct(0.0, 3.0, 1.0, 4.0) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        donut_reconstruct(0.5, 3.0, 1.0, 5.0)


def test_variance_ratio_examples():
    assert variance_ratio(5 / 12, 0.75) == pytest.approx(5 / 9, rel=1e-12)
    assert variance_ratio(1.0, 0.5) == pytest.approx(0.5)
    assert variance_ratio(0.0, 0.5) == 0.0
    for lam in (0.0, 1.0, 1.5):
        with pytest.raises(ValueError):
            variance_ratio(0.5, lam)


@given(st.floats(0.0, 1.0), st.floats(1e-6, 1 - 1e-6, exclude_min=True))
def test_variance_ratio_below_one(wp, lam):
    r = variance_ratio(wp, lam)
    assert 0.0 <= r < 1.0
    if 0 < wp < 1:
        assert r == pytest.approx(donut_variance(wp, lam, 1) / direct_variance(wp, lam, 1), rel=1e-9)


def test_donut_estimates_on_chain():
    chain = build_chain([Donut(1.0, r, dim=2) for r in (1.5, 2.0)], labels=[1.5, 2.0])
    curve = RobustnessCurve([1.5, 2.0], [100, 40], 100)
    est = donut_estimates(chain, curve)
    assert est[0].estimate == 1.0
    assert est[1].lam == pytest.approx(0.75)
    assert est[1].estimate == pytest.approx(1 - 0.75 * 0.6)
    assert est[1].ci_lo <= est[1].estimate <= est[1].ci_hi


def test_donut_variance_reduction_d3():
    # second configuration besides the acceptance one: d=3, r0=1, r=1.5, r*=1.25
    r0, r, rs, d = 1.0, 1.5, 1.25, 3
    N, T = 500, 2000
    donut_chain = build_chain([Donut(r0, r, dim=d)], labels=[r])
    ball_chain = build_chain([Ball(r, dim=d)], labels=[r])
    pred = InnerBall(rs)
    lam = donut_chain[0].fraction
    truth = (rs / r) ** d
    via_donut = np.empty(T)
    direct = np.empty(T)
    for t in range(T):
        wp = run(donut_chain, N, pred, make_stream(606, t)).successes()[0] / N
        via_donut[t] = donut_reconstruct(wp, donut_chain[0].volume, Ball(r0, dim=d).volume, ball_chain[0].volume)
        direct[t] = naive_run(ball_chain, N, pred, make_stream(606, t, "naive")).successes()[0] / N
    wp_true = (rs**d - r0**d) / (r**d - r0**d)
    expected = variance_ratio(wp_true, lam)
    measured = via_donut.var(ddof=1) / direct.var(ddof=1)
    assert abs(via_donut.mean() - truth) < 4 * via_donut.std() / math.sqrt(T)
    assert abs(measured / expected - 1) < 0.15
    assert measured < 1
