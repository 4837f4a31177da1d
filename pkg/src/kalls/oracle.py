"""Simulated labeling oracle with a query budget."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExhausted, InvalidInputError
from .geometry import Pool
from .problems import ProblemSpec


@dataclass(frozen=True)
class QueryRecord:
    order: int
    pool_index: int
    label: int
    charged_total: int


class BudgetedOracle:
    """Labels pool points with ``Y ~ Bernoulli(eta(X_i))``.

    Labels are drawn lazily from a single seeded stream at the first request
    for an index and cached. A repeated request returns the cached label and
    is charged again only when ``recharge_duplicates`` is set.
    """

    def __init__(self, pool: Pool, spec: ProblemSpec, budget: int, seed=0, recharge_duplicates: bool = False):
        if budget < 0:
            raise InvalidInputError(f"budget must be >= 0, got {budget}")
        if pool.dim != spec.dim:
            raise InvalidInputError(f"pool dimension {pool.dim} does not match problem dimension {spec.dim}")
        self.pool = pool
        self.spec = spec
        self.budget = int(budget)
        self.recharge_duplicates = recharge_duplicates
        self.charged = 0
        self.label_cache: dict[int, int] = {}
        self.log: list[QueryRecord] = []
        self._rng = np.random.default_rng(seed)

    def remaining(self) -> int:
        return self.budget - self.charged

    def is_cached(self, i: int) -> bool:
        return i in self.label_cache

    def query(self, i: int) -> int:
        """Label of pool point ``i``; raises :class:`BudgetExhausted` if a
        charge is due and nothing is left."""
        i = int(i)
        if not 0 <= i < len(self.pool):
            raise InvalidInputError(f"pool index {i} out of range")
        cached = self.label_cache.get(i)
        charge = cached is None or self.recharge_duplicates
        if charge and self.charged >= self.budget:
            raise BudgetExhausted(f"budget of {self.budget} labels exhausted")
        if cached is None:
            eta = self.spec.eta_at(self.pool[i])
            cached = int(self._rng.random() < eta)
            self.label_cache[i] = cached
        if charge:
            self.charged += 1
        self.log.append(QueryRecord(len(self.log) + 1, i, cached, self.charged))
        return cached

    def write_log(self, path) -> None:
        """Query log as CSV: order, pool_index, label, charged_total."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["order", "pool_index", "label", "charged_total"])
            for rec in self.log:
                writer.writerow([rec.order, rec.pool_index, rec.label, rec.charged_total])
