"""Passive k_n-NN learner, the comparison arm for active learning."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .classifier import NNClassifier
from .errors import InvalidInputError
from .geometry import Pool
from .oracle import BudgetedOracle


@dataclass(frozen=True)
class PassiveParams:
    alpha: float
    beta: float
    d: int
    k_override: int | None = None

    @classmethod
    def for_problem(cls, spec, k_override: int | None = None) -> "PassiveParams":
        return cls(spec.alpha, spec.beta, spec.dim, k_override)


def choose_k_n(n: int, params: PassiveParams) -> int:
    """``ceil(n^(2a/(2a+d)))`` clamped to [1, n-1], unless overridden."""
    if params.k_override is not None:
        return int(params.k_override)
    exponent = 2.0 * params.alpha / (2.0 * params.alpha + params.d)
    k = math.ceil(round(n**exponent, 9))
    return max(1, min(k, n - 1))


def train_passive(pool: Pool, oracle: BudgetedOracle, n: int, params: PassiveParams) -> NNClassifier:
    """Label the first ``n`` pool points and return the k_n-NN rule over them."""
    if n < 1:
        raise InvalidInputError(f"passive training needs n >= 1, got {n}")
    if n > len(pool):
        raise InvalidInputError(f"n={n} exceeds pool size {len(pool)}")
    if n > oracle.remaining():
        raise InvalidInputError(f"n={n} exceeds remaining budget {oracle.remaining()}")
    labels = [oracle.query(i) for i in range(n)]
    k = choose_k_n(n, params)
    if not 1 <= k <= n:
        raise InvalidInputError(f"k={k} incompatible with n={n}")
    return NNClassifier(pool.points[:n], labels, k=k)
