"""Exact uniform samplers and reproducible random streams.

Streams are :class:`numpy.random.Generator` instances over the counter-based
Philox bit generator.  A stream is keyed by ``(seed, trial, purpose)``; the
pair ``(trial, purpose)`` becomes the ``spawn_key`` of a
:class:`numpy.random.SeedSequence`, so distinct keys give independent streams
and no coordination is needed between parallel trials.

All samplers are direct transformations (no rejection), so their cost per
point does not depend on the shape of the set.
"""

from __future__ import annotations

import math
import zlib
from functools import singledispatch

import numpy as np
from scipy import stats

from .geometry import Ball, Box, BoxUnion, Donut, UncertaintySet, norm

__all__ = [
    "GENERATOR",
    "generator_name",
    "make_stream",
    "sample_uniform",
    "radial_coordinate",
    "radial_ks_test",
]

GENERATOR = "numpy.random.Philox"


def generator_name() -> str:
    """Generator identity recorded in output headers."""
    return f"{GENERATOR} (numpy {np.__version__})"


def purpose_code(purpose) -> int:
    if isinstance(purpose, (int, np.integer)):
        return int(purpose)
    return zlib.crc32(str(purpose).encode("utf-8"))


def make_stream(seed: int, trial: int = 0, purpose="engine") -> np.random.Generator:
    """Independent, reproducible stream for ``(seed, trial, purpose)``.

    >>> a = make_stream(7, 0, "engine").random(3)
    >>> b = make_stream(7, 0, "engine").random(3)
    >>> bool((a == b).all())
    True
    """
    seed, trial = int(seed), int(trial)
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer; got {seed}")
    if trial < 0:
        raise ValueError(f"trial index must be non-negative; got {trial}")
    ss = np.random.SeedSequence(seed, spawn_key=(trial, purpose_code(purpose)))
    return np.random.Generator(np.random.Philox(ss))


def _directions(p, dim, n, rng):
    """Points on the unit p-sphere distributed by cone measure.

    Scaling such a direction by ``R`` with ``R**dim`` uniform on [a, b]
    gives a point uniform on the corresponding p-norm shell.
    """
    if p == 2:
        z = rng.standard_normal((n, dim))
        return z / np.sqrt(np.sum(z * z, axis=1, keepdims=True))
    if p == 1:
        e = rng.standard_exponential((n, dim))
        signs = rng.integers(0, 2, size=(n, dim)) * 2 - 1
        return signs * e / np.sum(e, axis=1, keepdims=True)
    y = rng.uniform(-1.0, 1.0, size=(n, dim))
    return y / np.max(np.abs(y), axis=1, keepdims=True)


def _size(size):
    return 1 if size is None else int(size)


def _finish(x, size):
    return x[0] if size is None else x


@singledispatch
def sample_uniform(s: UncertaintySet, rng: np.random.Generator, size=None):
    """Uniform draw(s) from ``s``.

    Returns one point of shape ``(d,)`` when ``size`` is None, otherwise an
    array of shape ``(size, d)``.
    """
    raise TypeError(f"no uniform sampler for {type(s).__name__}")


@sample_uniform.register
def _(s: Ball, rng, size=None):
    n, d = _size(size), s.dim
    if s.norm == math.inf:
        x = rng.uniform(-s.radius, s.radius, size=(n, d))
    elif s.norm == 1:
        # first d coordinates of a flat Dirichlet(d + 1) fill the unit simplex
        e = rng.standard_exponential((n, d + 1))
        signs = rng.integers(0, 2, size=(n, d)) * 2 - 1
        x = s.radius * signs * e[:, :d] / np.sum(e, axis=1, keepdims=True)
    else:
        u = rng.random(n)
        x = _directions(2, d, n, rng) * (s.radius * u ** (1.0 / d))[:, None]
    return _finish(x + s.center, size)


@sample_uniform.register
def _(s: Box, rng, size=None):
    n = _size(size)
    x = s.center + rng.uniform(-1.0, 1.0, size=(n, s.dim)) * s.half_widths
    return _finish(x, size)


@sample_uniform.register
def _(s: Donut, rng, size=None):
    n, d = _size(size), s.dim
    hole = (s.inner_radius / s.outer_radius) ** d
    u = rng.random(n)
    rad = s.outer_radius * (hole + u * (1.0 - hole)) ** (1.0 / d)
    # rounding can push the radius a hair below the hole
    rad = np.clip(rad, s.inner_radius, s.outer_radius)
    x = _directions(s.norm, d, n, rng) * rad[:, None] + s.center
    return _finish(x, size)


@sample_uniform.register
def _(s: BoxUnion, rng, size=None):
    n = _size(size)
    logv = s.component_log_volumes
    prob = np.exp(logv - logv.max())
    prob /= prob.sum()
    which = rng.choice(len(s.boxes), size=n, p=prob)
    x = np.empty((n, s.dim))
    offsets = rng.uniform(-1.0, 1.0, size=(n, s.dim))
    for k, b in enumerate(s.boxes):
        sel = which == k
        x[sel] = b.center + offsets[sel] * b.half_widths
    return _finish(x, size)


def radial_coordinate(s: UncertaintySet, points) -> np.ndarray:
    """Normalised radial coordinate, uniform on [0, 1] under the uniform law on ``s``.

    For a shell between radii ``a <= b`` in the set's own norm this is
    ``(|q - c|^d - a^d) / (b^d - a^d)``; boxes use the box gauge
    ``max_k |q_k - c_k| / h_k`` with ``a = 0, b = 1``, and unions apply the
    box gauge of the component holding each point.
    """
    q = np.atleast_2d(np.asarray(points, dtype=float))
    d = s.dim
    if isinstance(s, Ball):
        return (norm(q - s.center, s.norm) / s.radius) ** d
    if isinstance(s, Donut):
        hole = (s.inner_radius / s.outer_radius) ** d
        t = (norm(q - s.center, s.norm) / s.outer_radius) ** d
        return (t - hole) / (1.0 - hole)
    if isinstance(s, Box):
        return np.max(np.abs(q - s.center) / s.half_widths, axis=1) ** d
    if isinstance(s, BoxUnion):
        comp = s.component_of(q)
        if np.any(comp < 0):
            raise ValueError("points outside the union have no radial coordinate")
        out = np.empty(q.shape[0])
        for k, b in enumerate(s.boxes):
            sel = comp == k
            out[sel] = radial_coordinate(b, q[sel])
        return out
    raise TypeError(f"no radial coordinate for {type(s).__name__}")


def radial_ks_test(s: UncertaintySet, points) -> float:
    """p-value of the KS test of the radial coordinate against U(0, 1)."""
    u = radial_coordinate(s, points)
    return float(stats.kstest(u, "uniform").pvalue)
