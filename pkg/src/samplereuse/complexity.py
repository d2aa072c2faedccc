"""Closed-form expected costs of sample reuse and their bounds.

For a nested chain with volumes ``v_1 <= ... <= v_m`` the expected number of
fresh experiments for set ``i`` is ``N (1 - v_i / v_{i+1})`` (with
``v_{m+1} = inf``), the expected total is ``N (m - sum v_i / v_{i+1})``, and
that total is strictly below ``N (1 + ln(v_m / v_1))`` whatever ``m`` is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import NestedChain

__all__ = [
    "expected_fresh",
    "expected_total",
    "reuse_cost_factor",
    "theorem_bound",
    "corollary_bound",
    "scalar_gap",
    "sequence_gap",
    "CostReport",
    "trial_statistics",
    "Z_THRESHOLD",
]

Z_THRESHOLD = 3.0


def _log_volumes(chain_or_volumes):
    if isinstance(chain_or_volumes, NestedChain):
        return np.asarray(chain_or_volumes.log_volumes, dtype=float)
    v = np.asarray(chain_or_volumes, dtype=float).reshape(-1)
    if v.size == 0 or np.any(~(v > 0)) or np.any(~np.isfinite(v)):
        raise ValueError("volumes must be positive and finite")
    if np.any(np.diff(v) < 0):
        raise ValueError("volumes must be non-decreasing")
    return np.log(v)


def expected_fresh(chain_or_volumes, N) -> np.ndarray:
    """Expected fresh draws per set: ``N (1 - v_i / v_{i+1})``, and ``N`` for the largest."""
    logv = _log_volumes(chain_or_volumes)
    ratios = np.exp(logv[:-1] - logv[1:])
    return N * np.append(1.0 - ratios, 1.0)


def reuse_cost_factor(chain_or_volumes) -> float:
    """``m - sum_i v_i / v_{i+1}``: expected total cost in units of N."""
    logv = _log_volumes(chain_or_volumes)
    return float(logv.size - np.sum(np.exp(logv[:-1] - logv[1:])))


def expected_total(chain_or_volumes, N) -> float:
    return N * reuse_cost_factor(chain_or_volumes)


def theorem_bound(v_min, v_max, N) -> float:
    """``(1 + ln(v_max / v_min)) N``, the chain-length-free bound on the expected total."""
    if not (v_min > 0 and v_max > 0):
        raise ValueError("volumes must be positive")
    if v_max < v_min:
        raise ValueError("need v_min <= v_max")
    return (1.0 + math.log(v_max / v_min)) * N


def log_theorem_bound(log_v_min, log_v_max, N) -> float:
    """:func:`theorem_bound` from log volumes (safe in high dimension)."""
    if log_v_max < log_v_min:
        raise ValueError("need v_min <= v_max")
    return (1.0 + (log_v_max - log_v_min)) * N


def corollary_bound(d, r_min, r_max, N) -> float:
    """``(1 + d ln(r_max / r_min)) N`` for chains of scaled shapes with vol ∝ r^d."""
    if int(d) != d or d < 1:
        raise ValueError("dimension must be a positive integer")
    if not (r_min > 0 and r_max >= r_min):
        raise ValueError("need 0 < r_min <= r_max")
    return (1.0 + d * math.log(r_max / r_min)) * N


def scalar_gap(x):
    """``1/x + ln x - 1``; positive for every x > 1."""
    x = np.asarray(x, dtype=float)
    return 1.0 / x + np.log(x) - 1.0


def sequence_gap(r):
    """``1 + ln(r_m / r_1) - (m - sum r_i / r_{i+1})``; positive for increasing r."""
    r = np.asarray(r, dtype=float)
    m = r.shape[-1]
    cost = m - np.sum(r[..., :-1] / r[..., 1:], axis=-1)
    return 1.0 + np.log(r[..., -1] / r[..., 0]) - cost


@dataclass(frozen=True, eq=False)
class CostReport:
    """Measured fresh counts against their exact expectations.

    Per-set and total means are taken over truncation-free trials only; the
    number of trials with surplus is reported in ``truncated_trials``.
    ``z`` is NaN where the stderr is zero and the mean matches exactly
    (see ``exact_match``).
    """

    N: int
    trials: int
    truncated_trials: int
    expected: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    z: np.ndarray
    expected_total: float
    mean_total: float
    stderr_total: float
    z_total: float
    theorem_bound: float
    corollary_bound: Optional[float] = None
    quantiles: Optional[dict] = None

    @property
    def exact_match(self) -> bool:
        return self.stderr_total == 0 and self.mean_total == self.expected_total

    def within(self, threshold=Z_THRESHOLD) -> bool:
        if self.exact_match:
            return True
        return bool(abs(self.z_total) < threshold)

    def rows(self):
        """``(set_index, expected_fresh, mean_fresh, stderr, z)`` rows, index from 1, then totals.

        A zero-stderr mean equal to its expectation has its z written as ``"exact"``.
        """

        def zcell(mean, expected, stderr, z):
            return "exact" if stderr == 0 and mean == expected else float(z)

        for i in range(self.expected.size):
            e, mu, se = float(self.expected[i]), float(self.mean[i]), float(self.stderr[i])
            yield (i + 1, e, mu, se, zcell(mu, e, se, self.z[i]))
        yield ("total", self.expected_total, self.mean_total, self.stderr_total,
               zcell(self.mean_total, self.expected_total, self.stderr_total, self.z_total))


COST_COLUMNS = ("set_index", "expected_fresh", "mean_fresh", "stderr", "z")


def _zscore(mean, expected, stderr):
    mean, expected, stderr = np.broadcast_arrays(
        np.asarray(mean, float), np.asarray(expected, float), np.asarray(stderr, float)
    )
    z = np.full(mean.shape, np.nan)
    nz = stderr > 0
    z[nz] = (mean[nz] - expected[nz]) / stderr[nz]
    off = (~nz) & (mean != expected)
    z[off] = np.sign(mean[off] - expected[off]) * np.inf
    return z


def trial_statistics(ledgers: Sequence, expected=None, corollary=None) -> CostReport:
    """Aggregate ledgers of repeated runs of one configuration.

    Parameters
    ----------
    ledgers : sequence of ReuseLedger
        At least two, all with the same ``N`` and chain volumes.
    expected : array-like, optional
        Oracle per-set expectations; defaults to :func:`expected_fresh` of
        the ledgers' volumes.
    corollary : float, optional
        Scaled-shape bound to carry in the report.
    """
    ledgers = list(ledgers)
    if len(ledgers) < 2:
        raise ValueError("need at least two ledgers")
    first = ledgers[0]
    for led in ledgers[1:]:
        if led.N != first.N or led.m != first.m or not np.allclose(
            led.log_volumes, first.log_volumes, rtol=0, atol=1e-12
        ):
            raise ValueError("ledgers come from different configurations")
    N = first.N
    logv = np.asarray(first.log_volumes, dtype=float)
    if expected is None:
        if logv.size != first.m:
            raise ValueError("ledgers carry no volumes; pass expected values")
        expected = expected_fresh(np.exp(logv - logv[0]), N)
    expected = np.asarray(expected, dtype=float)
    if expected.size != first.m:
        raise ValueError("expected values do not match the chain length")

    clean = [led for led in ledgers if not led.truncated]
    fresh = np.array([led.fresh for led in clean], dtype=float).reshape(len(clean), first.m)
    totals = fresh.sum(axis=1)
    n = len(clean)
    if n >= 2:
        mean = fresh.mean(axis=0)
        stderr = fresh.std(axis=0, ddof=1) / math.sqrt(n)
        mean_total = float(totals.mean())
        stderr_total = float(totals.std(ddof=1) / math.sqrt(n))
    else:
        mean = fresh.mean(axis=0) if n else np.full(first.m, np.nan)
        stderr = np.full(first.m, np.nan)
        mean_total = float(totals.mean()) if n else math.nan
        stderr_total = math.nan
    exp_total = float(expected.sum())
    all_totals = np.array([led.total for led in ledgers], dtype=float)
    quantiles = {q: float(np.quantile(all_totals, q)) for q in (0.05, 0.5, 0.95)}
    if logv.size == first.m:
        bound = log_theorem_bound(logv[0], logv[-1], N)
    else:
        bound = math.nan
    return CostReport(
        N=N,
        trials=len(ledgers),
        truncated_trials=len(ledgers) - n,
        expected=expected,
        mean=mean,
        stderr=stderr,
        z=_zscore(mean, expected, stderr),
        expected_total=exp_total,
        mean_total=mean_total,
        stderr_total=stderr_total,
        z_total=float(_zscore(mean_total, exp_total, stderr_total)),
        theorem_bound=bound,
        corollary_bound=corollary,
        quantiles=quantiles,
    )
