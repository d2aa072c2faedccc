"""Sample-reuse schedule over a nested chain.

Sets are processed from the largest to the smallest.  Every fresh sample is
drawn uniformly from the set it was generated for, its predicate outcome is
evaluated once, and its membership in every smaller set is recorded.  A
smaller set first takes the fresh samples of larger sets that fall inside it
(in arrival order) and only draws the shortfall.  A uniform point of ``B_j``
conditioned on landing in ``B_i ⊆ B_j`` is uniform on ``B_i``, so each set
still receives ``N`` i.i.d. uniform experiments.

When more than ``N`` earlier samples are available for a set, the first ``N``
in arrival order are used and the excess is recorded as surplus.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .geometry import NestedChain
from .predicates import Predicate, PredicateError
from .sampling import sample_uniform

__all__ = ["SampleRecord", "ReuseLedger", "ReuseResult", "run", "naive_run"]


@dataclass(frozen=True, eq=False)
class SampleRecord:
    """One fresh experiment.

    ``membership[k]`` tells whether the point lies in set ``k`` for
    ``k = 0..origin``; it is None for records of :func:`naive_run`.
    """

    point: np.ndarray
    origin: int
    outcome: bool
    arrival: int
    membership: Optional[np.ndarray]


@dataclass(frozen=True)
class ReuseLedger:
    """Cost accounting of one run, indexed by set (0 = smallest).

    fresh[i] + reused[i] == N for every set; surplus[i] counts reusable
    records that were left over because more than N were available.
    """

    N: int
    fresh: Tuple[int, ...]
    reused: Tuple[int, ...]
    surplus: Tuple[int, ...]
    log_volumes: Tuple[float, ...] = ()

    @property
    def m(self) -> int:
        return len(self.fresh)

    @property
    def total(self) -> int:
        """Total number of experiments actually performed."""
        return int(sum(self.fresh))

    @property
    def naive_cost(self) -> int:
        return self.N * self.m

    @property
    def truncated(self) -> bool:
        return any(s > 0 for s in self.surplus)


@dataclass(frozen=True, eq=False)
class ReuseResult:
    """Fresh-sample store plus the ``N`` delivered record indices of every set.

    Arrays are indexed by arrival number: ``points[a]``, ``origin[a]``,
    ``outcome[a]``.  ``delivered[i]`` lists the arrivals handed to set ``i``.
    Fresh samples of set ``j`` occupy one contiguous block starting at
    ``block_start[j]``; ``membership[j]`` is that block's ``(n_j, j + 1)``
    bitmap.
    """

    chain: NestedChain
    N: int
    points: np.ndarray
    origin: np.ndarray
    outcome: np.ndarray
    membership: Optional[Tuple[np.ndarray, ...]]
    block_start: Tuple[int, ...]
    delivered: Tuple[np.ndarray, ...]
    ledger: ReuseLedger
    evaluations: int

    def delivered_points(self, i) -> np.ndarray:
        return self.points[self.delivered[i]]

    def delivered_outcomes(self, i) -> np.ndarray:
        return self.outcome[self.delivered[i]]

    def outcomes(self) -> List[np.ndarray]:
        return [self.delivered_outcomes(i) for i in range(self.chain.m)]

    def successes(self) -> np.ndarray:
        return np.array([int(np.count_nonzero(o)) for o in self.outcomes()])

    def record(self, arrival) -> SampleRecord:
        a = int(arrival)
        o = int(self.origin[a])
        memb = None
        if self.membership is not None:
            memb = self.membership[o][a - self.block_start[o]].copy()
        return SampleRecord(
            point=self.points[a].copy(),
            origin=o,
            outcome=bool(self.outcome[a]),
            arrival=a,
            membership=memb,
        )

    def records(self, i) -> List[SampleRecord]:
        return [self.record(a) for a in self.delivered[i]]


def _check_args(chain, N):
    N_int = int(N)
    if N_int != N or N_int < 1:
        raise ValueError(f"N must be a positive integer; got {N!r}")
    if chain.m < 1:
        raise ValueError("empty chain")
    return N_int


def _evaluate(predicate, q):
    if q.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    try:
        return np.asarray(predicate(q), dtype=bool).reshape(-1)
    except Exception as exc:
        # find the first point that fails on its own
        for x in q:
            try:
                predicate(x[None, :])
            except Exception as inner:
                raise PredicateError(f"predicate failed at point {x.tolist()}: {inner}", x) from inner
        raise PredicateError(f"predicate failed on a batch of {q.shape[0]} points: {exc}", q[0]) from exc


def run(chain: NestedChain, N: int, predicate: Predicate, rng: np.random.Generator) -> ReuseResult:
    """Deliver ``N`` uniform experiments to every set of ``chain`` with sample reuse.

    Parameters
    ----------
    chain : NestedChain
    N : int
        Experiments required per set.
    predicate : callable
        Batch predicate; evaluated exactly once per fresh sample.
    rng : numpy.random.Generator
        Consumed in a fixed order, so the result is a deterministic function
        of ``(chain, N, predicate, rng state)``.

    Returns
    -------
    ReuseResult
    """
    N = _check_args(chain, N)
    m = chain.m
    blocks_pts, blocks_origin, blocks_out, blocks_memb = [], [], [], []
    block_start = [0] * m
    memb_by_origin: List[Optional[np.ndarray]] = [None] * m
    n_stored = 0
    delivered: List[Optional[np.ndarray]] = [None] * m
    fresh = [0] * m
    reused = [0] * m
    surplus = [0] * m
    evaluations = 0

    for i in range(m - 1, -1, -1):
        # every stored record so far has origin > i
        if blocks_memb:
            col = np.concatenate([b[:, i] for b in blocks_memb])
            pool = np.flatnonzero(col)
        else:
            pool = np.zeros(0, dtype=np.intp)
        take = pool[:N]
        surplus[i] = max(0, pool.size - N)
        reused[i] = int(take.size)
        k = N - take.size
        fresh[i] = k

        q = sample_uniform(chain[i], rng, size=k)
        out = _evaluate(predicate, q)
        evaluations += k
        memb = chain.membership(q, upto=i)
        # drawn from B_i by construction; don't let boundary rounding say otherwise
        memb[:, i] = True

        block_start[i] = n_stored
        memb_by_origin[i] = memb
        blocks_pts.append(q)
        blocks_origin.append(np.full(k, i, dtype=np.intp))
        blocks_out.append(out)
        blocks_memb.append(memb)
        delivered[i] = np.concatenate([take, n_stored + np.arange(k, dtype=np.intp)])
        n_stored += k

    points = np.concatenate(blocks_pts) if n_stored else np.zeros((0, chain.dim))
    ledger = ReuseLedger(
        N=N,
        fresh=tuple(fresh),
        reused=tuple(reused),
        surplus=tuple(surplus),
        log_volumes=tuple(float(v) for v in chain.log_volumes),
    )
    return ReuseResult(
        chain=chain,
        N=N,
        points=points,
        origin=np.concatenate(blocks_origin),
        outcome=np.concatenate(blocks_out),
        membership=tuple(memb_by_origin),
        block_start=tuple(block_start),
        delivered=tuple(delivered),
        ledger=ledger,
        evaluations=evaluations,
    )


def naive_run(chain: NestedChain, N: int, predicate: Predicate, rng: np.random.Generator) -> ReuseResult:
    """Baseline: ``N`` independent fresh samples for every set (cost ``N * m``).

    Sets are visited largest first, like :func:`run`.  No membership bitmaps
    are computed.
    """
    N = _check_args(chain, N)
    m = chain.m
    pts, origin, outs, delivered = [], [], [], [None] * m
    for i in range(m - 1, -1, -1):
        q = sample_uniform(chain[i], rng, size=N)
        start = (m - 1 - i) * N
        pts.append(q)
        origin.append(np.full(N, i, dtype=np.intp))
        outs.append(_evaluate(predicate, q))
        delivered[i] = start + np.arange(N, dtype=np.intp)
    ledger = ReuseLedger(
        N=N,
        fresh=(N,) * m,
        reused=(0,) * m,
        surplus=(0,) * m,
        log_volumes=tuple(float(v) for v in chain.log_volumes),
    )
    return ReuseResult(
        chain=chain,
        N=N,
        points=np.concatenate(pts),
        origin=np.concatenate(origin),
        outcome=np.concatenate(outs),
        membership=None,
        block_start=tuple((m - 1 - i) * N for i in range(m)),
        delivered=tuple(delivered),
        ledger=ledger,
        evaluations=N * m,
    )
