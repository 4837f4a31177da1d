"""Euclidean nearest-neighbor primitives over a fixed pool of points.

All queries are brute-force scans. Ties in distance are always broken by
ascending pool index, so every query is deterministic.
"""

from __future__ import annotations

import math
from functools import cached_property

import numpy as np

from .errors import InvalidInputError


def as_point(x, dim: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a 1-d float array, optionally checking its dimension."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise InvalidInputError(f"a point must be 1-d, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise InvalidInputError(f"point has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("point has non-finite coordinates")
    return arr


def pairwise_distances(points: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Distances from every row of ``points`` to ``x``.

    Every distance in the package goes through this function so that a pair
    always gets bit-identical distances regardless of which query asked.
    """
    diff = points - x
    return np.sqrt(np.sum(diff * diff, axis=-1))


class Pool:
    """Immutable, ordered collection of d-dimensional points.

    The position of a point in the pool is its identity.
    """

    def __init__(self, points, dim: int | None = None):
        arr = np.array(points, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1) if dim in (None, 1) else arr.reshape(-1, dim)
        if arr.ndim != 2:
            raise InvalidInputError(f"pool points must form a 2-d array, got shape {arr.shape}")
        if dim is not None and arr.shape[1] != dim:
            raise InvalidInputError(f"pool has dimension {arr.shape[1]}, expected {dim}")
        if arr.shape[1] < 1:
            raise InvalidInputError("pool dimension must be positive")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("pool contains non-finite coordinates")
        arr.setflags(write=False)
        self._points = arr

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def dim(self) -> int:
        return self._points.shape[1]

    def __len__(self) -> int:
        return self._points.shape[0]

    def __getitem__(self, i) -> np.ndarray:
        return self._points[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Pool):
            return NotImplemented
        return self._points.shape == other._points.shape and bool(
            np.array_equal(self._points, other._points)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"Pool(size={len(self)}, dim={self.dim})"

    def distances(self, x) -> np.ndarray:
        return pairwise_distances(self._points, as_point(x, self.dim))

    @cached_property
    def sorted_order_1d(self) -> np.ndarray:
        """Pool indices sorted by coordinate (1-d pools only), ties by index."""
        if self.dim != 1:
            raise InvalidInputError("sorted order is only defined for 1-d pools")
        order = np.argsort(self._points[:, 0], kind="stable")
        order.setflags(write=False)
        return order


def distance(a, b) -> float:
    """Euclidean distance between two points of equal dimension."""
    a = as_point(a)
    b = as_point(b)
    if a.shape != b.shape:
        raise InvalidInputError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(pairwise_distances(a[None, :], b)[0])


def _ordered_prefix(dist: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` smallest entries of ``dist``, ties by index."""
    w = dist.shape[0]
    if k >= w:
        return np.argsort(dist, kind="stable")
    kth = np.partition(dist, k - 1)[k - 1]
    cand = np.flatnonzero(dist <= kth)
    return cand[np.argsort(dist[cand], kind="stable")][:k]


def k_nearest(pool: Pool, x, k: int) -> np.ndarray:
    """Pool indices of the ``k`` nearest points to ``x``, nearest first."""
    if k < 1 or k > len(pool):
        raise InvalidInputError(f"k={k} must lie in [1, {len(pool)}]")
    return _ordered_prefix(pool.distances(x), int(k))


def count_within(pool: Pool, x, r: float) -> int:
    """Number of pool points in the closed ball of radius ``r`` around ``x``."""
    if not r >= 0.0:
        raise InvalidInputError(f"radius {r} must be >= 0")
    return int(np.count_nonzero(pool.distances(x) <= r))


def mass_rank(p: float, w: int) -> int:
    """Smallest integer j with j / w >= p, evaluated in floating point."""
    j = max(1, math.ceil(p * w))
    while j > 1 and (j - 1) / w >= p:
        j -= 1
    while j / w < p:
        j += 1
    return j


def empirical_r_p(pool: Pool, x, p: float) -> float:
    """Smallest radius whose closed ball around ``x`` holds a fraction >= p of the pool."""
    if not 0.0 < p <= 1.0:
        raise InvalidInputError(f"p={p} must lie in (0, 1]")
    dist = pool.distances(x)
    j = mass_rank(p, dist.shape[0])
    return float(np.partition(dist, j - 1)[j - 1])
