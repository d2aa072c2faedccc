"""Robustness requirements evaluated on sampled uncertainty instances.

A predicate maps a batch of points ``(n, d)`` to a boolean array of length
``n``.  Built-ins either admit a closed-form robustness function (used as
test oracles) or, for :class:`HurwitzCubic`, give a small control example.
Any callable with the same batch signature can be wrapped in
:class:`UserPredicate`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import Ball, Box, Donut, UncertaintySet, norm

__all__ = [
    "Predicate",
    "Constant",
    "InnerBall",
    "Halfspace",
    "HurwitzCubic",
    "UserPredicate",
    "CountingPredicate",
    "PredicateError",
    "evaluate",
    "analytic_truth",
    "hurwitz_cubic_stable",
]


class PredicateError(RuntimeError):
    """Predicate evaluation failed; ``point`` is the offending sample."""

    def __init__(self, message, point):
        super().__init__(message)
        self.point = np.asarray(point)


class Predicate:
    """Base class.  Subclasses implement ``_evaluate(points) -> bool array``."""

    dim: Optional[int] = None

    def _evaluate(self, q):
        raise NotImplementedError

    def __call__(self, points):
        q = np.asarray(points, dtype=float)
        single = q.ndim == 1
        q = np.atleast_2d(q)
        if self.dim is not None and q.shape[1] != self.dim:
            raise ValueError(
                f"point dimension mismatch: predicate expects {self.dim}, got {q.shape[1]}"
            )
        out = np.asarray(self._evaluate(q), dtype=bool).reshape(-1)
        if out.shape[0] != q.shape[0]:
            raise ValueError("predicate returned the wrong number of outcomes")
        return bool(out[0]) if single else out


def evaluate(predicate: Predicate, point):
    return predicate(point)


@dataclass(frozen=True)
class Constant(Predicate):
    value: bool = True

    def _evaluate(self, q):
        return np.full(q.shape[0], bool(self.value))


@dataclass(frozen=True, eq=False)
class InnerBall(Predicate):
    """True when ``||q - center||_2 <= radius`` (center defaults to the origin)."""

    radius: float
    center: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("threshold radius must be positive")
        if self.center is not None:
            c = np.array(self.center, dtype=float).reshape(-1)
            object.__setattr__(self, "center", c)
            object.__setattr__(self, "dim", c.size)

    def _evaluate(self, q):
        c = 0.0 if self.center is None else self.center
        return norm(q - c, 2) <= self.radius


@dataclass(frozen=True, eq=False)
class Halfspace(Predicate):
    """True when ``<normal, q> <= offset``."""

    normal: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        n = np.array(self.normal, dtype=float).reshape(-1)
        if not np.any(n != 0):
            raise ValueError("halfspace normal must be nonzero")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "dim", n.size)

    def _evaluate(self, q):
        return q @ self.normal <= self.offset


def hurwitz_cubic_stable(a2, a1, a0):
    """Routh test for ``s^3 + a2 s^2 + a1 s + a0``; marginal cases count as unstable."""
    a2, a1, a0 = np.asarray(a2), np.asarray(a1), np.asarray(a0)
    return (a2 > 0) & (a1 > 0) & (a0 > 0) & (a2 * a1 > a0)


@dataclass(frozen=True, eq=False)
class HurwitzCubic(Predicate):
    """Stability of ``s^3 + a2 s^2 + a1 s + a0`` with perturbed coefficients.

    The coefficients at a sample ``q`` are ``nominal + perturbation @ q`` where
    ``nominal = (a2, a1, a0)`` and ``perturbation`` is a ``(3, d)`` matrix.
    """

    nominal: np.ndarray
    perturbation: np.ndarray

    def __post_init__(self):
        a = np.array(self.nominal, dtype=float).reshape(-1)
        if a.size != 3:
            raise ValueError("nominal must hold (a2, a1, a0)")
        P = np.atleast_2d(np.array(self.perturbation, dtype=float))
        if P.shape[0] != 3:
            raise ValueError("perturbation map must have 3 rows")
        object.__setattr__(self, "nominal", a)
        object.__setattr__(self, "perturbation", P)
        object.__setattr__(self, "dim", P.shape[1])

    def coefficients(self, q):
        return self.nominal + np.atleast_2d(q) @ self.perturbation.T

    def _evaluate(self, q):
        c = self.coefficients(q)
        return hurwitz_cubic_stable(c[:, 0], c[:, 1], c[:, 2])


@dataclass(frozen=True, eq=False)
class UserPredicate(Predicate):
    """Wrap an arbitrary function.

    With ``vectorized=True`` the function receives the whole ``(n, d)`` batch,
    otherwise it is called once per point.
    """

    func: Callable
    vectorized: bool = False
    dim: Optional[int] = None

    def _evaluate(self, q):
        if self.vectorized:
            return self.func(q)
        return np.fromiter((bool(self.func(x)) for x in q), dtype=bool, count=q.shape[0])


@dataclass(eq=False)
class CountingPredicate(Predicate):
    """Pass-through that counts how many points were evaluated."""

    inner: Predicate
    count: int = field(default=0)

    def __post_init__(self):
        self.dim = self.inner.dim

    def _evaluate(self, q):
        self.count += q.shape[0]
        return self.inner._evaluate(q)


def _concentric(pred_center, s):
    c = np.zeros(s.dim) if pred_center is None else pred_center
    return c.size == s.dim and np.allclose(c, s.center, rtol=0, atol=1e-12)


def analytic_truth(predicate: Predicate, s: UncertaintySet) -> Optional[float]:
    """Exact fraction of ``s`` on which the predicate holds, or None when unknown."""
    if isinstance(predicate, Constant):
        return 1.0 if predicate.value else 0.0
    d = s.dim
    if isinstance(predicate, InnerBall) and _concentric(predicate.center, s):
        rs = predicate.radius
        if isinstance(s, Ball) and s.norm == 2:
            return min(1.0, (rs / s.radius) ** d)
        if isinstance(s, Donut) and s.norm == 2:
            r0, r = s.inner_radius, s.outer_radius
            if rs <= r0:
                return 0.0
            if rs >= r:
                return 1.0
            return (rs**d - r0**d) / (r**d - r0**d)
    if isinstance(predicate, Halfspace) and isinstance(s, (Ball, Box, Donut)):
        if predicate.normal.size == d and math.isclose(
            float(predicate.normal @ s.center), predicate.offset, rel_tol=0, abs_tol=1e-12
        ):
            return 0.5
    return None
