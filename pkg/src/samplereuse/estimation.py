"""Robustness curves, confidence intervals, margins and the donut estimator."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .geometry import Donut, NestedChain

__all__ = [
    "RobustnessCurve",
    "DonutEstimate",
    "BELOW_GRID",
    "binomial_ci",
    "estimate_curve",
    "pool_curves",
    "margin",
    "curve_infimum",
    "donut_reconstruct",
    "donut_estimates",
    "variance_ratio",
    "direct_variance",
    "donut_variance",
]


class _BelowGrid:
    """Marker returned by :func:`margin` when no grid radius qualifies."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "BELOW_GRID"

    def __str__(self):
        return "below_grid"

    def __bool__(self):
        return False


BELOW_GRID = _BelowGrid()


def binomial_ci(k, N, level=0.95):
    """Clopper-Pearson interval for ``k`` successes out of ``N`` trials.

    Returns ``(lo, hi)`` with ``lo = 0`` when ``k = 0`` and ``hi = 1`` when
    ``k = N``.  Works elementwise on arrays.
    """
    if not 0 < level < 1:
        raise ValueError(f"confidence level must lie in (0, 1); got {level}")
    k = np.asarray(k)
    N = np.asarray(N)
    if np.any(k < 0) or np.any(k > N) or np.any(N < 1):
        raise ValueError("need 0 <= k <= N and N >= 1")
    alpha = 1.0 - level
    with np.errstate(invalid="ignore"):
        lo = np.where(k == 0, 0.0, stats.beta.ppf(alpha / 2, k, N - k + 1))
        hi = np.where(k == N, 1.0, stats.beta.ppf(1 - alpha / 2, k + 1, N - k))
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


@dataclass(frozen=True, eq=False)
class RobustnessCurve:
    """Per-set success counts ``k`` out of ``N`` with point estimates and CIs."""

    labels: np.ndarray
    k: np.ndarray
    N: np.ndarray
    level: float = 0.95

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=float)
        k = np.asarray(self.k, dtype=np.int64)
        N = np.broadcast_to(np.asarray(self.N, dtype=np.int64), k.shape).copy()
        if not (labels.shape == k.shape == N.shape) or k.ndim != 1:
            raise ValueError("labels, k and N must be 1-D with equal length")
        if np.any(k < 0) or np.any(k > N):
            raise ValueError("success counts must lie in [0, N]")
        for a in (labels, k, N):
            a.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "N", N)

    def __len__(self):
        return int(self.k.size)

    @property
    def estimate(self) -> np.ndarray:
        return self.k / self.N

    @property
    def ci(self) -> Tuple[np.ndarray, np.ndarray]:
        return binomial_ci(self.k, self.N, self.level)

    def rows(self):
        """``(index, radius, k, N, estimate, ci_lo, ci_hi)`` per set, index from 1."""
        lo, hi = self.ci
        est = self.estimate
        for i in range(len(self)):
            yield (
                i + 1,
                float(self.labels[i]),
                int(self.k[i]),
                int(self.N[i]),
                float(est[i]),
                float(lo[i]),
                float(hi[i]),
            )


CURVE_COLUMNS = ("index", "radius", "k", "N", "estimate", "ci_lo", "ci_hi")


def estimate_curve(outcomes: Sequence, labels: Sequence[float], level=0.95) -> RobustnessCurve:
    """Curve from per-set outcome arrays (or a :class:`~samplereuse.engine.ReuseResult`)."""
    if hasattr(outcomes, "outcomes"):
        outcomes = outcomes.outcomes()
    outcomes = list(outcomes)
    if len(outcomes) != len(labels):
        raise ValueError(f"{len(outcomes)} outcome sets for {len(labels)} labels")
    k, N = [], []
    for i, o in enumerate(outcomes):
        if o is None:
            raise ValueError(f"set {i} has no outcomes")
        arr = np.asarray(o)
        if arr.size == 0:
            raise ValueError(f"set {i} has no outcomes")
        if arr.dtype != bool:
            if arr.dtype == object or np.any(~np.isin(arr, (0, 1))):
                raise ValueError(f"set {i} has missing or non-boolean outcomes")
            arr = arr.astype(bool)
        k.append(int(np.count_nonzero(arr)))
        N.append(arr.size)
    return RobustnessCurve(labels, k, N, level)


def pool_curves(curves: Sequence[RobustnessCurve]) -> RobustnessCurve:
    """Sum counts of independent curves over the same grid."""
    curves = list(curves)
    if not curves:
        raise ValueError("nothing to pool")
    first = curves[0]
    for c in curves[1:]:
        if not np.array_equal(c.labels, first.labels):
            raise ValueError("curves are on different grids")
    k = np.sum([c.k for c in curves], axis=0)
    N = np.sum([c.N for c in curves], axis=0)
    return RobustnessCurve(first.labels, k, N, first.level)


def _check_grid(curve):
    if len(curve) == 0:
        raise ValueError("empty curve")
    if np.any(np.diff(curve.labels) <= 0):
        raise ValueError("curve radii must be strictly increasing")


def margin(curve: RobustnessCurve, eps: float, conservative: bool = False):
    """Largest grid radius whose estimate is at least ``1 - eps``.

    With ``conservative=True`` the CI lower bound is compared instead of the
    point estimate.  Returns :data:`BELOW_GRID` when no radius qualifies.
    """
    _check_grid(curve)
    if not 0 <= eps < 1:
        raise ValueError(f"risk level must lie in [0, 1); got {eps}")
    values = curve.ci[0] if conservative else curve.estimate
    ok = np.flatnonzero(values >= 1.0 - eps)
    if ok.size == 0:
        return BELOW_GRID
    return float(curve.labels[ok[-1]])


def curve_infimum(curve: RobustnessCurve, r: float) -> float:
    """Minimum estimate over grid radii ``<= r``."""
    _check_grid(curve)
    if r < curve.labels[0]:
        raise ValueError(f"radius {r} lies below the grid (smallest {curve.labels[0]})")
    keep = curve.labels <= r
    return float(np.min(curve.estimate[keep]))


def donut_reconstruct(wp_hat, vol_donut, vol_inner, vol_outer):
    """Robustness at the outer radius from the estimate on the donut.

    ``(wp_hat * vol_donut + vol_inner) / vol_outer``; the inner ball is taken
    as certified, so the result lies in ``[vol_inner / vol_outer, 1]``.
    """
    if not math.isclose(vol_donut + vol_inner, vol_outer, rel_tol=1e-9):
        raise ValueError(
            f"volumes inconsistent: donut {vol_donut} + inner {vol_inner} != outer {vol_outer}"
        )
    return _reconstruct(wp_hat, vol_donut / vol_outer)


def _reconstruct(wp_hat, lam):
    wp = np.asarray(wp_hat, dtype=float)
    if np.any(wp < 0) or np.any(wp > 1):
        raise ValueError("donut estimate must lie in [0, 1]")
    # same affine map written as 1 - lam (1 - wp), which hits 1 exactly at wp = 1
    out = np.clip(1.0 - lam * (1.0 - wp), 1.0 - lam, 1.0)
    return float(out) if out.ndim == 0 else out


def _check_lambda(lam):
    if not 0 < lam < 1:
        raise ValueError(f"donut volume fraction must lie in (0, 1); got {lam}")


def variance_ratio(wp, lam):
    """Variance of the donut estimator over that of the direct estimator.

    ``wp * lam / (1 - (1 - wp) * lam)``, with ``wp`` the success fraction on
    the donut and ``lam = vol(donut) / vol(outer ball)``.
    """
    _check_lambda(lam)
    if not 0 <= wp <= 1:
        raise ValueError(f"probability must lie in [0, 1]; got {wp}")
    return wp * lam / (1.0 - (1.0 - wp) * lam)


def direct_variance(wp, lam, N):
    """Variance of the plain Monte Carlo estimate of P(r) with N samples."""
    q = (1.0 - wp) * lam
    return q * (1.0 - q) / N


def donut_variance(wp, lam, N):
    """Variance of the donut-reconstructed estimate of P(r) with N samples."""
    return (1.0 - wp) * wp * lam**2 / N


@dataclass(frozen=True)
class DonutEstimate:
    label: float
    wp_hat: float
    lam: float
    estimate: float
    ci_lo: float
    ci_hi: float


DONUT_COLUMNS = ("index", "radius", "donut_estimate", "lambda", "estimate", "ci_lo", "ci_hi")


def donut_estimates(chain: NestedChain, curve: RobustnessCurve) -> List[DonutEstimate]:
    """Reconstruct P(r_i) for every set of a donut chain from its curve.

    The CI on the donut fraction is mapped through the same affine map.
    """
    if not all(isinstance(s, Donut) for s in chain):
        raise ValueError("donut reconstruction needs a chain of donuts")
    if len(curve) != chain.m:
        raise ValueError("curve and chain lengths differ")
    lo, hi = curve.ci
    out = []
    for i, s in enumerate(chain):
        lam = s.fraction
        wp = float(curve.estimate[i])
        out.append(
            DonutEstimate(
                label=float(curve.labels[i]),
                wp_hat=wp,
                lam=lam,
                estimate=_reconstruct(wp, lam),
                ci_lo=_reconstruct(float(lo[i]), lam),
                ci_hi=_reconstruct(float(hi[i]), lam),
            )
        )
    return out
