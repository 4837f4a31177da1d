"""KALLS: pool-based active learning that outputs a 1-NN classifier.

The learner walks the pool in order. A point whose label can already be
inferred from the active set (:func:`reliable`) is skipped; otherwise its
label is estimated from the labels of its nearest pool neighbors, queried one
at a time until the vote is confident (:func:`confident_label`). Finally
:func:`learn` drops the entries whose vote never became confident and returns
the 1-NN rule over the rest.

All logarithms are natural logarithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .classifier import NNClassifier
from .errors import BudgetExhausted, InvalidInputError
from .geometry import Pool, count_within, distance, k_nearest
from .oracle import BudgetedOracle


@dataclass(frozen=True)
class KallsParams:
    alpha: float
    L: float
    beta: float
    C: float
    delta: float
    epsilon: float
    budget_n: int

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise InvalidInputError(f"alpha={self.alpha} must lie in (0, 1]")
        if self.L < 1.0:
            raise InvalidInputError(f"L={self.L} must be >= 1")
        if self.beta < 0.0:
            raise InvalidInputError(f"beta={self.beta} must be >= 0")
        if self.C < 1.0:
            raise InvalidInputError(f"C={self.C} must be >= 1")
        if not 0.0 < self.delta < 1.0:
            raise InvalidInputError(f"delta={self.delta} must lie in (0, 1)")
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidInputError(f"epsilon={self.epsilon} must lie in (0, 1)")
        if self.budget_n < 0:
            raise InvalidInputError(f"budget_n={self.budget_n} must be >= 0")

    @classmethod
    def for_problem(cls, spec, delta: float, epsilon: float, budget_n: int) -> "KallsParams":
        return cls(spec.alpha, spec.L, spec.beta, spec.C, delta, epsilon, budget_n)

    def check_dimension(self, d: int) -> None:
        # alpha * beta == d is accepted: the linear 1-d benchmark sits exactly there.
        if self.alpha * self.beta > d:
            raise InvalidInputError(f"alpha*beta={self.alpha * self.beta:g} exceeds dimension {d}")


def _robust_ceil(x: float) -> int:
    return math.ceil(round(x, 9))


def delta_hat(epsilon: float, C: float, beta: float) -> float:
    """Margin beyond which the output must agree with the Bayes rule."""
    if not 0.0 < epsilon < 1.0:
        raise InvalidInputError(f"epsilon={epsilon} must lie in (0, 1)")
    if C < 1.0:
        raise InvalidInputError(f"C={C} must be >= 1")
    if beta < 0.0:
        raise InvalidInputError(f"beta={beta} must be >= 0")
    return max(epsilon / 2.0, (epsilon / (2.0 * C)) ** (1.0 / (beta + 1.0)))


def log_term(s: int, delta: float) -> float:
    return math.log(4.0 * s * s / delta)


def k_cap(s: int, delta_hat: float, delta: float) -> int:
    """Maximum number of neighbor labels spent on the point examined at step ``s``."""
    if not 0.0 < delta_hat < 1.0:
        raise InvalidInputError(f"delta_hat={delta_hat} must lie in (0, 1)")
    if not 0.0 < delta < 1.0:
        raise InvalidInputError(f"delta={delta} must lie in (0, 1)")
    if s < 1:
        raise InvalidInputError(f"s={s} must be >= 1")
    return _robust_ceil(16.0 / delta_hat**2 * (math.log(1.0 / delta_hat) + log_term(s, delta)))


def tau(k: int, s: int, delta: float) -> float:
    """Confidence half-width of a k-label vote at step ``s``."""
    if k < 1:
        raise InvalidInputError(f"k={k} must be >= 1")
    if not 0.0 < delta < 1.0:
        raise InvalidInputError(f"delta={delta} must lie in (0, 1)")
    return math.sqrt(log_term(s, delta) / k)


def _vote_margin(ones: int, k: int, s: int, delta: float) -> float:
    """``|mean - 1/2| - tau``; positive exactly when the vote is confident."""
    return abs(ones / k - 0.5) - tau(k, s, delta)


@dataclass
class ActiveSetEntry:
    center_index: int
    s: int
    point: np.ndarray = field(repr=False)
    y_hat: int
    queries: list[tuple[int, int]]
    stopped_early: bool
    truncated: bool = False

    def __post_init__(self):
        if not self.queries:
            raise InvalidInputError("an active-set entry needs at least one query")

    @property
    def n_queries(self) -> int:
        return len(self.queries)

    @property
    def ones(self) -> int:
        return sum(label for _, label in self.queries)

    @property
    def mean(self) -> float:
        return self.ones / self.n_queries

    def tau(self, delta: float) -> float:
        return tau(self.n_queries, self.s, delta)

    def margin(self, delta: float) -> float:
        return _vote_margin(self.ones, self.n_queries, self.s, delta)

    def confident(self, delta: float) -> bool:
        return self.margin(delta) > 0.0


class ActiveSet:
    """Entries in strictly increasing acquisition order."""

    def __init__(self, entries=()):
        self.entries: list[ActiveSetEntry] = []
        for e in entries:
            self.append(e)

    def append(self, entry: ActiveSetEntry) -> None:
        if self.entries and entry.s <= self.entries[-1].s:
            raise InvalidInputError("acquisition indices must increase")
        self.entries.append(entry)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]


@dataclass(frozen=True)
class ConfidentLabel:
    y_hat: int
    queries: list[tuple[int, int]]
    stopped_early: bool
    truncated: bool


def confident_label(
    pool: Pool,
    oracle: BudgetedOracle,
    s: int,
    center: int,
    params: KallsParams,
    delta_hat_value: float | None = None,
) -> ConfidentLabel:
    """Vote on the label of pool point ``center`` with its nearest neighbors.

    Neighbor labels are requested nearest first (the point itself included)
    and the loop exits as soon as the vote clears ``tau(k, s, delta)``. It
    also stops at ``k_cap`` labels or when the oracle cannot pay for the next
    one; ``truncated`` marks the latter.

    Raises :class:`BudgetExhausted` if the oracle has no budget at entry.
    """
    if oracle.remaining() <= 0:
        raise BudgetExhausted("no budget left to label a new center")
    dh = delta_hat(params.epsilon, params.C, params.beta) if delta_hat_value is None else delta_hat_value
    limit = min(k_cap(s, dh, params.delta), len(pool))
    x = pool[center]
    block = min(limit, 64)
    neighbors = k_nearest(pool, x, block)
    queries: list[tuple[int, int]] = []
    ones = 0
    stopped_early = truncated = False
    for k in range(1, limit + 1):
        if k > len(neighbors):
            block = min(limit, 4 * block)
            neighbors = k_nearest(pool, x, block)
        idx = int(neighbors[k - 1])
        try:
            label = oracle.query(idx)
        except BudgetExhausted:
            truncated = True
            break
        queries.append((idx, label))
        ones += label
        if _vote_margin(ones, k, s, params.delta) > 0.0:
            stopped_early = True
            break
    if not queries:
        raise BudgetExhausted("no label could be obtained")
    y_hat = int(2 * ones >= len(queries))
    return ConfidentLabel(y_hat, queries, stopped_early, truncated)


def _witness_capacity(entry: ActiveSetEntry, delta: float, dim: int, alpha: float) -> int | None:
    """Largest ball count c with ``c / m <= pi^(d/alpha)`` for this entry, or
    None when the entry cannot vouch for anything (pi <= 0)."""
    pi = entry.margin(delta)
    if pi <= 0.0:
        return None
    m = log_term(entry.s, delta) / (2.0 * pi * pi)
    bound = pi ** (dim / alpha)
    approx = m * bound
    if not math.isfinite(approx) or approx > 2**62:
        return 2**62
    c = max(0, math.floor(approx))
    while (c + 1) / m <= bound:
        c += 1
    while c > 0 and c / m > bound:
        c -= 1
    return c


def reliable(pool: Pool, active_set: ActiveSet, s: int, center: int, params: KallsParams) -> bool:
    """Whether the label of pool point ``center`` can be inferred from the active set.

    True iff some entry has ``pi > 0`` and the number of pool points within
    distance(X_center, X_entry) of X_center, divided by ``m``, is at most
    ``pi^(d/alpha)``.
    """
    x = pool[center]
    for entry in active_set:
        pi = entry.margin(params.delta)
        if pi <= 0.0:
            continue
        m = log_term(entry.s, params.delta) / (2.0 * pi * pi)
        count = count_within(pool, x, distance(x, entry.point))
        if count / m <= pi ** (pool.dim / params.alpha):
            return True
    return False


class _ReliabilityIndex:
    """Incremental equivalent of :func:`reliable` for the main loop.

    For 1-d pools each new entry marks, once, every pool point it vouches
    for; afterwards a lookup is O(1). In higher dimension each lookup makes
    one distance scan and compares ball counts against entry capacities.
    Both paths reproduce :func:`reliable` exactly.
    """

    def __init__(self, pool: Pool, params: KallsParams):
        self.pool = pool
        self.params = params
        self.w = len(pool)
        self.centers: list[int] = []
        self.capacities: list[int] = []
        self.everything = False
        if pool.dim == 1:
            self.order = pool.sorted_order_1d
            self.coords = pool.points[self.order, 0]
            self.rank = np.empty(self.w, dtype=np.int64)
            self.rank[self.order] = np.arange(self.w)
            self.mask = np.zeros(self.w, dtype=bool)

    def add(self, entry: ActiveSetEntry) -> None:
        cap = _witness_capacity(entry, self.params.delta, self.pool.dim, self.params.alpha)
        if cap is None or cap < 1:
            return
        if cap >= self.w:
            self.everything = True
            return
        if self.pool.dim == 1:
            self._mark_1d(entry.center_index, cap)
        else:
            self.centers.append(entry.center_index)
            self.capacities.append(cap)

    def is_reliable(self, i: int) -> bool:
        if self.everything:
            return True
        if self.pool.dim == 1:
            return bool(self.mask[i])
        if not self.centers:
            return False
        dist = self.pool.distances(self.pool[i])
        r = dist[self.centers]
        if len(self.centers) <= 16:
            counts = np.count_nonzero(dist[None, :] <= r[:, None], axis=1)
        else:
            counts = np.searchsorted(np.sort(dist), r, side="right")
        return bool(np.any(counts <= np.asarray(self.capacities)))

    def _dist(self, pos: np.ndarray, x: np.ndarray) -> np.ndarray:
        diff = self.coords[pos] - x
        return np.sqrt(diff * diff)

    def _mark_1d(self, center: int, cap: int) -> None:
        # A candidate at sorted position j already has |j - p| + 1 points in its
        # ball (everything between it and the center), so |j - p| < cap.
        w, cs = self.w, self.coords
        p = int(self.rank[center])
        pos = np.arange(max(0, p - cap + 1), min(w, p + cap))
        x = cs[pos]
        c = cs[p]
        diff = c - x
        r = np.sqrt(diff * diff)

        hi = np.searchsorted(cs, x + r, side="right")
        while True:
            up = hi < w
            up[up] = self._dist(hi[up], x[up]) <= r[up]
            down = hi - 1 > pos
            down[down] = self._dist(hi[down] - 1, x[down]) > r[down]
            if not (up.any() or down.any()):
                break
            hi = hi + up - down

        lo = np.searchsorted(cs, x - r, side="left")
        lo = np.minimum(lo, pos)
        while True:
            down = lo > 0
            down[down] = self._dist(lo[down] - 1, x[down]) <= r[down]
            up = lo < pos
            up[up] = self._dist(lo[up], x[up]) > r[up]
            if not (up.any() or down.any()):
                break
            lo = lo - down + up

        counts = hi - lo
        self.mask[self.order[pos[counts <= cap]]] = True


def learn(active_set: ActiveSet, params: KallsParams, dim: int | None = None) -> NNClassifier:
    """1-NN rule over the confident entries of the active set.

    With no confident entry the result is flagged degenerate and predicts the
    majority inferred label of the whole active set (0 if it is empty).
    """
    kept = [e for e in active_set if e.confident(params.delta)]
    if dim is None:
        dim = active_set[0].point.shape[0] if len(active_set) else 1
    if kept:
        points = np.array([e.point for e in kept]).reshape(len(kept), dim)
        return NNClassifier(points, [e.y_hat for e in kept], k=1)
    votes = [e.y_hat for e in active_set]
    fallback = int(bool(votes) and 2 * sum(votes) >= len(votes))
    return NNClassifier(np.empty((0, dim)), [], k=1, degenerate=True, fallback_label=fallback, dim=dim)


@dataclass(frozen=True)
class TraceRow:
    s: int
    decision: str  # "skipped", "labeled" or "budget-stop"
    n_queries: int
    mean_q: float | None
    tau: float | None
    y_hat: int | None
    charged_total: int


@dataclass
class KallsRun:
    classifier: NNClassifier
    active_set: ActiveSet
    trace: list[TraceRow]
    params: KallsParams
    delta_hat: float
    charged: int

    @property
    def retained_size(self) -> int:
        return len(self.classifier)

    @property
    def degenerate(self) -> bool:
        return self.classifier.degenerate

    @property
    def truncated_entries(self) -> int:
        return sum(e.truncated for e in self.active_set)

    def __iter__(self):
        return iter((self.classifier, self.active_set, self.trace))


def run_kalls(pool: Pool, oracle: BudgetedOracle, params: KallsParams) -> KallsRun:
    """Run the full active learner on ``pool`` with labels from ``oracle``.

    Points are examined in pool order, s = 1..w; the loop stops early once
    the oracle has no budget left.
    """
    if len(pool) == 0:
        raise InvalidInputError("pool is empty")
    params.check_dimension(pool.dim)
    dh = delta_hat(params.epsilon, params.C, params.beta)
    active = ActiveSet()
    trace: list[TraceRow] = []
    index = _ReliabilityIndex(pool, params)
    for s in range(1, len(pool) + 1):
        i = s - 1
        if oracle.remaining() <= 0:
            trace.append(TraceRow(s, "budget-stop", 0, None, None, None, oracle.charged))
            break
        if index.is_reliable(i):
            trace.append(TraceRow(s, "skipped", 0, None, None, None, oracle.charged))
            continue
        res = confident_label(pool, oracle, s, i, params, dh)
        entry = ActiveSetEntry(i, s, pool[i].copy(), res.y_hat, res.queries, res.stopped_early, res.truncated)
        active.append(entry)
        index.add(entry)
        trace.append(
            TraceRow(s, "labeled", entry.n_queries, entry.mean, entry.tau(params.delta), entry.y_hat, oracle.charged)
        )
    classifier = learn(active, params, dim=pool.dim)
    return KallsRun(classifier, active, trace, params, dh, oracle.charged)
