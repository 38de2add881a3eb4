"""Lloyd's K-means and its trimmed variant.

The trimmed variant rebuilds the retained set once per outer iteration from
the dispersion-degree rule evaluated against the current centroids, then
runs one assignment / update sweep over the retained samples only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import Dataset, Gmm, make_rng
from .dispersion import Metric, TrimPolicy, centroid_model, trim_mask

TrimFn = Callable[[Dataset, Gmm, TrimPolicy], np.ndarray]


@dataclass(frozen=True)
class KmeansConfig:
    k: int
    max_iters: int = 100
    convergence_tol: float = 1e-6
    seed: int = 0
    # floor for the per-cluster variances used by the Mahalanobis trim rule,
    # as a fraction of the global per-dimension data variance
    trim_variance_floor: float = 0.01

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be positive, got {self.k}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be positive, got {self.max_iters}")
        if self.convergence_tol < 0:
            raise ValueError("convergence_tol must be nonnegative")


@dataclass(frozen=True, eq=False)
class Clustering:
    """Result of a (trimmed) K-means run.

    ``labels`` has one entry per sample; trimmed samples carry -1.
    ``objective`` is the within-cluster sum of squares over retained samples.
    """

    centroids: np.ndarray
    labels: np.ndarray
    retained: np.ndarray
    objective: float
    n_iter: int
    converged: bool
    history: list = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def init_indices(T: int, k: int, seed: int) -> np.ndarray:
    if k > T:
        raise ValueError(f"cannot pick {k} initial centroids from {T} samples")
    return make_rng(seed).choice(T, size=k, replace=False)


def init_centroids(data: Dataset, k: int, seed: int) -> np.ndarray:
    """Copies of k distinct samples drawn uniformly without replacement."""
    return data.samples[init_indices(data.T, k, seed)].copy()


def sq_distances(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    out = np.empty((X.shape[0], centroids.shape[0]))
    for j, c in enumerate(centroids):
        out[:, j] = ((X - c) ** 2).sum(axis=1)
    return out


def objective(X: np.ndarray, centroids: np.ndarray, labels: np.ndarray, retained: np.ndarray) -> float:
    """Within-cluster sum of squared Euclidean distances over retained samples."""
    Xr = X[retained]
    return float(((Xr - centroids[labels[retained]]) ** 2).sum())


def _repair_empty(labels: np.ndarray, d2: np.ndarray, k: int) -> np.ndarray:
    # move the worst-fitted point of a multi-member cluster into each empty one
    labels = labels.copy()
    counts = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(counts == 0):
        cost = d2[np.arange(labels.size), labels].copy()
        cost[counts[labels] < 2] = -np.inf
        i = int(np.argmax(cost))
        if not np.isfinite(cost[i]):
            raise ValueError("not enough retained samples to populate every cluster")
        counts[labels[i]] -= 1
        labels[i] = j
        counts[j] = 1
        d2[i, j] = 0.0
    return labels


def _cluster_variances(X, labels, retained, k, floor):
    global_var = X.var(axis=0)
    out = np.tile(global_var, (k, 1))
    for j in range(k):
        members = X[retained & (labels == j)]
        if members.shape[0] >= 2:
            out[j] = members.var(axis=0)
    return np.maximum(out, np.maximum(floor, np.finfo(float).tiny))


def _lloyd(data: Dataset, cfg: KmeansConfig, policy: TrimPolicy | None, trim_fn: TrimFn) -> Clustering:
    X = data.samples
    T, k = data.T, cfg.k
    centroids = init_centroids(data, k, cfg.seed)
    retained = np.ones(T, dtype=bool)
    labels = np.full(T, -1, dtype=np.intp)
    trimming = policy is not None and not policy.disabled
    var_floor = cfg.trim_variance_floor * X.var(axis=0) if trimming else None

    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        prev_labels, prev_retained = labels, retained
        if trimming:
            if policy.metric is Metric.MAHALANOBIS and it > 1:
                variances = _cluster_variances(X, labels, retained, k, var_floor)
            else:
                variances = None
            retained = np.asarray(trim_fn(data, centroid_model(centroids, variances), policy), dtype=bool)
            if not retained.any():
                raise ValueError("trim threshold removed entire dataset")
            if retained.sum() < k:
                raise ValueError(f"only {retained.sum()} samples retained for {k} clusters")
        Xr = X[retained]
        d2 = sq_distances(Xr, centroids)
        lab_r = _repair_empty(np.argmin(d2, axis=1), d2, k)
        centroids = np.stack([Xr[lab_r == j].mean(axis=0) for j in range(k)])
        labels = np.full(T, -1, dtype=np.intp)
        labels[retained] = lab_r
        V = objective(X, centroids, labels, retained)
        if history:
            prev = history[-1]
            stable = np.array_equal(labels, prev_labels) and np.array_equal(retained, prev_retained)
            history.append(V)
            if stable or abs(prev - V) <= cfg.convergence_tol * max(prev, np.finfo(float).tiny):
                converged = True
                break
        else:
            history.append(V)

    return Clustering(centroids=centroids, labels=labels, retained=retained,
                      objective=history[-1], n_iter=it, converged=converged, history=history)


def kmeans(data: Dataset, cfg: KmeansConfig) -> Clustering:
    """Plain Lloyd iterations from randomly chosen sample centroids."""
    return _lloyd(data, cfg, None, trim_mask)


def trimmed_kmeans(data: Dataset, cfg: KmeansConfig, policy: TrimPolicy,
                   trim_fn: TrimFn = trim_mask) -> Clustering:
    """K-means over the samples kept by `trim_fn` at each iteration.

    With ``policy.tau == 1`` nothing is ever trimmed and the result is
    identical to :func:`kmeans` for the same seed.
    """
    return _lloyd(data, cfg, policy, trim_fn)
