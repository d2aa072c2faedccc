"""Uncertainty sets and nested chains of them.

Every set is closed, has an exact Lebesgue volume and knows how to test
membership for a batch of points.  Samplers live in :mod:`samplereuse.sampling`.

Volumes are kept as natural logarithms so that balls in high dimension do not
overflow; ``volume`` exposes the linear value.
"""

from __future__ import annotations

import math
from functools import cached_property
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "Ball",
    "Box",
    "Donut",
    "BoxUnion",
    "UncertaintySet",
    "NestedChain",
    "ChainError",
    "build_chain",
    "contains",
    "volume",
    "log_volume",
    "provably_contains",
    "audit_nestedness",
    "AuditReport",
    "Violation",
    "norm",
    "unit_ball_volume",
]

NORMS = (1, 2, math.inf)

# slack used by analytic containment checks, relative to the set scale
_REL_TOL = 1e-12


class ChainError(ValueError):
    """Raised when a sequence of sets cannot form a nested chain.

    ``indices`` holds the (0-based) positions of the offending pair.
    """

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(indices)


def _as_center(center, dim):
    if center is None:
        if dim is None:
            raise ValueError("either center or dim is required")
        arr = np.zeros(int(dim))
    else:
        arr = np.array(center, dtype=float).reshape(-1)
        if dim is not None and arr.size != dim:
            raise ValueError(f"center has {arr.size} coordinates, expected {dim}")
    if arr.size < 1:
        raise ValueError("dimension must be a positive integer")
    if not np.all(np.isfinite(arr)):
        raise ValueError("center must be finite")
    arr.setflags(write=False)
    return arr


def _check_norm(p):
    if p in ("inf", "infinity"):
        p = math.inf
    if p not in NORMS:
        raise ValueError(f"norm must be one of 1, 2, inf; got {p!r}")
    return math.inf if p == math.inf else int(p)


def _check_radius(r, what="radius"):
    r = float(r)
    if not (np.isfinite(r) and r > 0):
        raise ValueError(f"{what} must be positive and finite; got {r}")
    return r


def norm(x, p, axis=-1):
    """p-norm along ``axis`` for p in {1, 2, inf}."""
    x = np.abs(x)
    if p == 2:
        return np.sqrt(np.sum(x * x, axis=axis))
    if p == 1:
        return np.sum(x, axis=axis)
    return np.max(x, axis=axis)


def _log_unit_ball(dim, p):
    if p == 2:
        return 0.5 * dim * math.log(math.pi) - math.lgamma(0.5 * dim + 1.0)
    if p == 1:
        return dim * math.log(2.0) - math.lgamma(dim + 1.0)
    return dim * math.log(2.0)


def unit_ball_volume(dim, p=2):
    """Volume of the unit p-ball in R^dim (linear scale; may overflow to inf)."""
    p = _check_norm(p)
    if p == 2:
        if dim <= 300:
            # V_d = 2 pi / d * V_{d-2}, starting from V_0 = 1 or V_1 = 2
            v = 1.0 if dim % 2 == 0 else 2.0
            for k in range(2 + dim % 2, dim + 1, 2):
                v *= 2.0 * math.pi / k
            return v
    elif p == 1:
        if dim <= 170:
            return 2.0**dim / math.factorial(dim)
    else:
        return 2.0**dim
    return math.exp(_log_unit_ball(dim, p))


def _points(points, dim):
    """Return ``(array of shape (n, dim), was_single_point)``."""
    q = np.asarray(points, dtype=float)
    single = q.ndim == 1
    q2 = q.reshape(1, -1) if single else q
    if q2.ndim != 2 or q2.shape[1] != dim:
        raise ValueError(
            f"point dimension mismatch: set has dimension {dim}, got shape {q.shape}"
        )
    return q2, single


class UncertaintySet:
    """Base class: a closed, bounded region of R^d with positive volume."""

    # subclasses provide ``dim``, ``center``, ``log_volume`` and ``radius``
    # (a size label for curves: radius, outer radius or largest half-width)

    @property
    def volume(self) -> float:
        return math.exp(self.log_volume)

    def _contains(self, q):
        raise NotImplementedError

    def contains(self, points):
        """Membership of one point (bool) or of a batch of shape (n, d) (bool array)."""
        q, single = _points(points, self.dim)
        inside = self._contains(q)
        return bool(inside[0]) if single else inside


@dataclass(frozen=True, eq=False)
class Ball(UncertaintySet):
    """Closed p-norm ball ``{x : ||x - center||_p <= radius}``."""

    radius: float
    dim: Optional[int] = None
    norm: Union[int, float] = 2
    center: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "radius", _check_radius(self.radius))
        object.__setattr__(self, "norm", _check_norm(self.norm))
        c = _as_center(self.center, self.dim)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "dim", int(c.size))

    @property
    def log_volume(self):
        return _log_unit_ball(self.dim, self.norm) + self.dim * math.log(self.radius)

    def _contains(self, q):
        return norm(q - self.center, self.norm) <= self.radius

    def __repr__(self):
        p = "inf" if self.norm == math.inf else self.norm
        return f"Ball(radius={self.radius!r}, dim={self.dim}, norm={p})"


@dataclass(frozen=True, eq=False)
class Box(UncertaintySet):
    """Closed axis-aligned box ``center +/- half_widths``."""

    half_widths: np.ndarray
    center: Optional[np.ndarray] = None

    def __post_init__(self):
        h = np.array(self.half_widths, dtype=float).reshape(-1)
        if h.size < 1 or not np.all(np.isfinite(h)) or np.any(h <= 0):
            raise ValueError("half-widths must be positive and finite")
        h.setflags(write=False)
        object.__setattr__(self, "half_widths", h)
        object.__setattr__(self, "center", _as_center(self.center, h.size))

    @property
    def dim(self):
        return int(self.half_widths.size)

    @property
    def log_volume(self):
        return float(np.sum(np.log(2.0 * self.half_widths)))

    @property
    def radius(self):
        return float(np.max(self.half_widths))

    @property
    def lower(self):
        return self.center - self.half_widths

    @property
    def upper(self):
        return self.center + self.half_widths

    def _contains(self, q):
        return np.all(np.abs(q - self.center) <= self.half_widths, axis=1)

    def scaled(self, factor):
        """Same center, half-widths multiplied by ``factor``."""
        return Box(self.half_widths * float(factor), center=self.center)

    def __repr__(self):
        return f"Box(half_widths={self.half_widths.tolist()}, center={self.center.tolist()})"


@dataclass(frozen=True, eq=False)
class Donut(UncertaintySet):
    """Outer p-ball minus the open inner p-ball of radius ``inner_radius``.

    The set is closed: points at exactly ``inner_radius`` belong to it.
    """

    inner_radius: float
    outer_radius: float
    dim: Optional[int] = None
    norm: Union[int, float] = 2
    center: Optional[np.ndarray] = None

    def __post_init__(self):
        r0 = _check_radius(self.inner_radius, "inner radius")
        r = _check_radius(self.outer_radius, "outer radius")
        if not r0 < r:
            raise ValueError(f"donut requires 0 < inner radius < outer radius; got {r0}, {r}")
        object.__setattr__(self, "inner_radius", r0)
        object.__setattr__(self, "outer_radius", r)
        object.__setattr__(self, "norm", _check_norm(self.norm))
        c = _as_center(self.center, self.dim)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "dim", int(c.size))

    @property
    def radius(self):
        return self.outer_radius

    @property
    def fraction(self):
        """``vol(donut) / vol(outer ball) = 1 - (r0 / r)^d``."""
        return -math.expm1(self.dim * math.log(self.inner_radius / self.outer_radius))

    @property
    def inner_ball(self):
        return Ball(self.inner_radius, norm=self.norm, center=self.center)

    @property
    def outer_ball(self):
        return Ball(self.outer_radius, norm=self.norm, center=self.center)

    @property
    def log_volume(self):
        # log(V(r) - V(r0)) = log V(r) + log(1 - (r0/r)^d)
        return self.outer_ball.log_volume + math.log(self.fraction)

    def _contains(self, q):
        rad = norm(q - self.center, self.norm)
        return (rad >= self.inner_radius) & (rad <= self.outer_radius)

    def __repr__(self):
        p = "inf" if self.norm == math.inf else self.norm
        return (
            f"Donut(inner_radius={self.inner_radius!r}, outer_radius={self.outer_radius!r}, "
            f"dim={self.dim}, norm={p})"
        )


def _boxes_intersect(a, b):
    return bool(np.all(np.abs(a.center - b.center) <= a.half_widths + b.half_widths))


@dataclass(frozen=True, eq=False)
class BoxUnion(UncertaintySet):
    """Union of pairwise-disjoint closed axis-aligned boxes."""

    boxes: Tuple[Box, ...]
    center: np.ndarray = field(init=False)

    def __post_init__(self):
        boxes = tuple(self.boxes)
        if not boxes:
            raise ValueError("a union needs at least one box")
        dims = {b.dim for b in boxes}
        if len(dims) != 1:
            raise ValueError(f"union components disagree on dimension: {sorted(dims)}")
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                if _boxes_intersect(boxes[i], boxes[j]):
                    raise ValueError(f"union components {i} and {j} are not disjoint")
        object.__setattr__(self, "boxes", boxes)
        logv = np.array([b.log_volume for b in boxes])
        c = np.sum(np.exp(logv - logv.max())[:, None] * [b.center for b in boxes], axis=0)
        c = c / np.sum(np.exp(logv - logv.max()))
        c.setflags(write=False)
        # volume-weighted centroid; only informational
        object.__setattr__(self, "center", c)

    @property
    def dim(self):
        return self.boxes[0].dim

    @property
    def component_log_volumes(self):
        return np.array([b.log_volume for b in self.boxes])

    @property
    def log_volume(self):
        return float(logsumexp(self.component_log_volumes))

    @property
    def radius(self):
        return max(b.radius for b in self.boxes)

    def component_of(self, points):
        """Index of the component holding each point, -1 when outside."""
        q, _ = _points(points, self.dim)
        out = np.full(q.shape[0], -1)
        for k, b in enumerate(self.boxes):
            out[(out < 0) & b._contains(q)] = k
        return out

    def scaled(self, factor):
        return BoxUnion(tuple(b.scaled(factor) for b in self.boxes))

    def _contains(self, q):
        inside = np.zeros(q.shape[0], dtype=bool)
        for b in self.boxes:
            inside |= b._contains(q)
        return inside

    def __repr__(self):
        return f"BoxUnion({len(self.boxes)} boxes, dim={self.dim})"


def contains(s: UncertaintySet, point):
    """Closed-set membership test; see :meth:`UncertaintySet.contains`."""
    return s.contains(point)


def volume(s: UncertaintySet) -> float:
    return s.volume


def log_volume(s: UncertaintySet) -> float:
    return s.log_volume


def _tol(*scales):
    return _REL_TOL * max(1.0, *scales)


def provably_contains(a: UncertaintySet, b: UncertaintySet) -> Optional[bool]:
    """Decide ``a ⊆ b`` analytically.

    Returns True or False when the pair belongs to a family with an exact
    containment test, and None when only a statistical audit can tell.
    """
    if a.dim != b.dim:
        return False
    if isinstance(a, BoxUnion):
        verdicts = [provably_contains(c, b) for c in a.boxes]
        if all(v is True for v in verdicts):
            return True
        if any(v is False for v in verdicts):
            return False
        return None
    if isinstance(b, BoxUnion):
        # a connected set lies in a disjoint union of closed sets iff it lies in one of them
        if isinstance(a, Donut) and a.dim == 1:
            return None
        verdicts = [provably_contains(a, c) for c in b.boxes]
        if any(v is True for v in verdicts):
            return True
        if all(v is False for v in verdicts):
            return False
        return None
    if isinstance(a, Donut) and isinstance(b, Donut):
        if (
            a.norm == b.norm
            and np.array_equal(a.center, b.center)
            and a.inner_radius == b.inner_radius
        ):
            return a.outer_radius <= b.outer_radius + _tol(b.outer_radius)
        return None
    if isinstance(a, Donut):
        # the outer boundary belongs to the donut, and b is convex
        if isinstance(b, (Ball, Box)):
            return provably_contains(a.outer_ball, b)
        return None
    if isinstance(b, Donut):
        return None
    offset = np.abs(a.center - b.center)
    if isinstance(a, Ball) and isinstance(b, Ball):
        if a.norm != b.norm:
            return None
        gap = float(norm(offset, a.norm)) + a.radius - b.radius
        return gap <= _tol(b.radius)
    if isinstance(a, Box) and isinstance(b, Box):
        gap = offset + a.half_widths - b.half_widths
        return bool(np.all(gap <= _tol(float(np.max(b.half_widths)))))
    if isinstance(a, Ball) and isinstance(b, Box):
        # every p-ball reaches exactly its radius along each axis
        gap = offset + a.radius - b.half_widths
        return bool(np.all(gap <= _tol(float(np.max(b.half_widths)))))
    if isinstance(a, Box) and isinstance(b, Ball):
        far_vertex = offset + a.half_widths
        return float(norm(far_vertex, b.norm)) <= b.radius + _tol(b.radius)
    return None


@dataclass(frozen=True, eq=False)
class NestedChain:
    """Sets ``B_1 ⊆ B_2 ⊆ ... ⊆ B_m`` ordered smallest first.

    Build with :func:`build_chain`.  ``needs_audit`` is set when some adjacent
    pair could not be checked analytically.
    """

    sets: Tuple[UncertaintySet, ...]
    labels: Tuple[float, ...]
    log_volumes: np.ndarray
    needs_audit: bool = False

    @property
    def m(self) -> int:
        return len(self.sets)

    def __len__(self):
        return len(self.sets)

    def __getitem__(self, i):
        return self.sets[i]

    def __iter__(self):
        return iter(self.sets)

    @property
    def dim(self) -> int:
        return self.sets[0].dim

    @property
    def volumes(self) -> np.ndarray:
        return np.exp(self.log_volumes)

    @property
    def v_min(self) -> float:
        return float(np.exp(self.log_volumes[0]))

    @property
    def v_max(self) -> float:
        return float(np.exp(self.log_volumes[-1]))

    @property
    def volume_ratios(self) -> np.ndarray:
        """``v_i / v_{i+1}`` for i = 1..m-1, computed from log volumes."""
        return np.exp(np.diff(self.log_volumes) * -1.0)

    @cached_property
    def _radial_family(self):
        """(center, norm, inner radius, outer radii) for concentric ball/donut chains."""
        first = self.sets[0]
        if not isinstance(first, (Ball, Donut)):
            return None
        kind = type(first)
        for s in self.sets:
            if type(s) is not kind or s.norm != first.norm or not np.array_equal(s.center, first.center):
                return None
            if kind is Donut and s.inner_radius != first.inner_radius:
                return None
        inner = first.inner_radius if kind is Donut else None
        return first.center, first.norm, inner, np.array([s.radius for s in self.sets])

    def membership(self, points, upto=None):
        """Boolean matrix ``M[l, k] = points[l] in B_k`` for k <= upto (default all)."""
        q, _ = _points(points, self.dim)
        upto = self.m - 1 if upto is None else int(upto)
        fam = self._radial_family
        if fam is not None:
            center, p, inner, radii = fam
            rad = norm(q - center, p)[:, None]
            out = rad <= radii[None, : upto + 1]
            if inner is not None:
                out &= rad >= inner
            return out
        out = np.zeros((q.shape[0], upto + 1), dtype=bool)
        for k in range(upto + 1):
            out[:, k] = self.sets[k]._contains(q)
        return out


def build_chain(
    sets: Sequence[UncertaintySet],
    labels: Optional[Sequence[float]] = None,
    verify: str = "analytic",
) -> NestedChain:
    """Validate a smallest-to-largest sequence of sets and return a chain.

    Parameters
    ----------
    sets : sequence of UncertaintySet
        At least one set, all of the same dimension, ordered by inclusion.
    labels : sequence of float, optional
        One label per set used for curves.  Defaults to each set's ``radius``.
    verify : {"analytic", "audit"}
        ``"analytic"`` rejects any adjacent pair that is provably not nested.
        ``"audit"`` skips that rejection and marks the chain for
        :func:`audit_nestedness`.

    Raises
    ------
    ChainError
        Mixed dimensions, decreasing volumes, or a provably non-nested pair.
    """
    sets = tuple(sets)
    if not sets:
        raise ChainError("a chain needs at least one set")
    if verify not in ("analytic", "audit"):
        raise ValueError(f"verify must be 'analytic' or 'audit'; got {verify!r}")
    dims = [s.dim for s in sets]
    for i, d in enumerate(dims[1:], start=1):
        if d != dims[0]:
            raise ChainError(f"set {i} has dimension {d}, set 0 has {dims[0]}", (0, i))
    logv = np.array([s.log_volume for s in sets])
    for i in range(len(sets) - 1):
        if logv[i + 1] < logv[i] - 1e-12 * max(1.0, abs(logv[i])):
            raise ChainError(
                f"volumes decrease between sets {i} and {i + 1}: "
                f"{math.exp(logv[i]):.6g} > {math.exp(logv[i + 1]):.6g}",
                (i, i + 1),
            )
    needs_audit = verify == "audit"
    if verify == "analytic":
        for i in range(len(sets) - 1):
            verdict = provably_contains(sets[i], sets[i + 1])
            if verdict is False:
                raise ChainError(f"set {i} is not contained in set {i + 1}", (i, i + 1))
            if verdict is None:
                needs_audit = True
    if labels is None:
        labels = tuple(float(s.radius) for s in sets)
    else:
        labels = tuple(float(x) for x in labels)
        if len(labels) != len(sets):
            raise ChainError(f"{len(labels)} labels for {len(sets)} sets")
    logv.setflags(write=False)
    return NestedChain(sets, labels, logv, needs_audit)


@dataclass(frozen=True)
class Violation:
    """A point drawn from set ``source`` that is missing from larger set ``failing``."""

    point: Tuple[float, ...]
    source: int
    failing: int


@dataclass(frozen=True)
class AuditReport:
    samples_per_set: int
    violations: Tuple[Violation, ...]

    @property
    def passed(self) -> bool:
        return not self.violations


def audit_nestedness(chain: NestedChain, samples_per_set: int, rng) -> AuditReport:
    """Statistical nesting check.

    Draws ``samples_per_set`` uniform points from every set and lists each
    (point, source, failing) triple where a point of ``B_i`` is missing from
    some ``B_k`` with ``k > i``.  Violations come out in draw order.
    """
    from .sampling import sample_uniform

    K = int(samples_per_set)
    if K != samples_per_set or K < 1:
        raise ValueError(f"samples per set must be a positive integer; got {samples_per_set!r}")
    found = []
    for i, s in enumerate(chain.sets[:-1]):
        q = sample_uniform(s, rng, size=K)
        inside = np.column_stack([b._contains(q) for b in chain.sets[i + 1:]])
        for row, col in zip(*np.nonzero(~inside)):
            found.append(Violation(tuple(float(x) for x in q[row]), i, i + 1 + int(col)))
    return AuditReport(K, tuple(found))
