"""Majority-vote k-nearest-neighbor rule over a finite labeled set."""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .geometry import as_point


class NNClassifier:
    """k-NN majority vote; ties in distance go to the lower stored index and
    ties in the vote (even k) go to label 1.

    An empty stored set is only allowed for a ``degenerate`` classifier, which
    predicts ``fallback_label`` everywhere.
    """

    def __init__(self, points, labels, k: int = 1, degenerate: bool = False, fallback_label: int = 0, dim: int | None = None):
        labels = np.asarray(labels, dtype=np.int8).reshape(-1)
        if labels.size == 0:
            if not degenerate:
                raise InvalidInputError("empty classifier must be flagged degenerate")
            d = dim if dim is not None else (np.asarray(points).shape[-1] if np.asarray(points).ndim == 2 else 1)
            points = np.empty((0, d))
        else:
            points = np.asarray(points, dtype=float)
            points = points.reshape(labels.size, -1)
        if labels.size and not 1 <= k <= labels.size:
            raise InvalidInputError(f"k={k} must lie in [1, {labels.size}]")
        if not np.isin(labels, (0, 1)).all():
            raise InvalidInputError("labels must be 0 or 1")
        self.points = points
        self.labels = labels
        self.k = int(k)
        self.degenerate = degenerate
        self.fallback_label = int(fallback_label)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.labels.size

    def __repr__(self) -> str:
        flag = ", degenerate" if self.degenerate else ""
        return f"NNClassifier(n={len(self)}, k={self.k}{flag})"

    def predict(self, x) -> int:
        return int(self.predict_many(as_point(x, self.dim)[None, :])[0])

    def predict_many(self, X, chunk: int | None = None) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        if self.labels.size == 0:
            return np.full(X.shape[0], self.fallback_label, dtype=np.int8)
        n = self.labels.size
        if chunk is None:
            chunk = max(1, 4_000_000 // n)
        out = np.empty(X.shape[0], dtype=np.int8)
        for start in range(0, X.shape[0], chunk):
            out[start : start + chunk] = self._vote(X[start : start + chunk])
        return out

    def _vote(self, X: np.ndarray) -> np.ndarray:
        diff = X[:, None, :] - self.points[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        if self.k == 1:
            # argmin returns the first minimum, i.e. the lowest stored index
            return self.labels[np.argmin(dist, axis=1)]
        k = self.k
        kth = np.partition(dist, k - 1, axis=1)[:, k - 1 : k]
        closer = dist < kth
        ties = dist == kth
        need = k - closer.sum(axis=1, keepdims=True)
        chosen = closer | (ties & (np.cumsum(ties, axis=1) <= need))
        ones = (chosen * self.labels[None, :]).sum(axis=1)
        return (2 * ones >= k).astype(np.int8)
