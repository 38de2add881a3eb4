"""Maximum-likelihood EM for diagonal-covariance GMMs with variance and weight floors."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .core import Dataset, Gmm, atomic_write, component_log_densities
from .kmeans import Clustering

# absolute lower bound on any variance, whatever the configured floor
MIN_VARIANCE = 1e-300


@dataclass(frozen=True)
class EmConfig:
    max_iters: int = 50
    ll_tol: float = 1e-5
    variance_floor_factor: float = 0.01
    min_weight: float = 0.05

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be positive, got {self.max_iters}")
        if self.ll_tol < 0 or self.variance_floor_factor < 0:
            raise ValueError("ll_tol and variance_floor_factor must be nonnegative")
        if not 0 <= self.min_weight < 1:
            raise ValueError(f"min_weight must lie in [0, 1), got {self.min_weight}")


@dataclass(frozen=True)
class EmIteration:
    iteration: int
    log_likelihood: float
    num_floored_variances: int
    num_floored_weights: int


@dataclass(frozen=True, eq=False)
class EmResult:
    model: Gmm
    trace: list = field(default_factory=list)

    @property
    def log_likelihoods(self) -> np.ndarray:
        return np.array([it.log_likelihood for it in self.trace])


def variance_floor(X: np.ndarray, factor: float) -> np.ndarray:
    """factor times the global per-dimension variance of X."""
    return np.maximum(factor * X.var(axis=0), MIN_VARIANCE)


def floor_weights(weights, min_weight: float) -> tuple[np.ndarray, int]:
    """Clamp weights below `min_weight` and rescale the rest to keep a simplex.

    Returns the new weights and the number of clamped components.
    """
    w = np.asarray(weights, dtype=np.float64).copy()
    if min_weight <= 0:
        return w, 0
    if min_weight * w.size >= 1:
        raise ValueError(f"min_weight={min_weight} is infeasible for {w.size} components")
    clamped = np.zeros(w.size, dtype=bool)
    while True:
        new = (w < min_weight) & ~clamped
        if not new.any():
            break
        clamped |= new
        w[clamped] = min_weight
        free = ~clamped
        w[free] *= (1.0 - min_weight * clamped.sum()) / w[free].sum()
    return w, int(clamped.sum())


def e_step(X: np.ndarray, model: Gmm) -> tuple[np.ndarray, float]:
    """Log responsibilities (T, K) and total log-likelihood."""
    with np.errstate(divide="ignore"):
        weighted = component_log_densities(model, X) + np.log(model.weights)
    norm = logsumexp(weighted, axis=1)
    return weighted - norm[:, None], float(norm.sum())


def m_step(X: np.ndarray, resp: np.ndarray, var_floor: np.ndarray, min_weight: float):
    """Returns (model, num_floored_variances, num_floored_weights)."""
    T = X.shape[0]
    nk = resp.sum(axis=0)
    if np.any(nk <= 0):
        raise FloatingPointError(f"component(s) {np.flatnonzero(nk <= 0).tolist()} lost all responsibility")
    means = (resp.T @ X) / nk[:, None]
    var = np.empty_like(means)
    for k in range(means.shape[0]):
        var[k] = resp[:, k] @ (X - means[k]) ** 2 / nk[k]
    n_var = int((var < var_floor).sum())
    var = np.maximum(var, var_floor)
    weights, n_w = floor_weights(nk / T, min_weight)
    return Gmm.from_arrays(weights, means, var), n_var, n_w


def gmm_from_clustering(data: Dataset, c: Clustering, variance_floor_factor: float = 0.01,
                        min_weight: float = 0.0) -> Gmm:
    """Initial GMM: cluster fractions, centroids, and floored member variances.

    Only retained samples count.  Each cluster needs at least two members.
    """
    X = data.samples[c.retained]
    labels = c.labels[c.retained]
    counts = np.bincount(labels, minlength=c.k)
    small = np.flatnonzero(counts < 2)
    if small.size:
        raise ValueError(f"clusters {small.tolist()} have fewer than 2 members; re-cluster "
                         "with a different seed or a smaller k")
    floor = variance_floor(X, variance_floor_factor)
    var = np.stack([X[labels == j].var(axis=0) for j in range(c.k)])
    weights, _ = floor_weights(counts / counts.sum(), min_weight)
    return Gmm.from_arrays(weights, c.centroids, np.maximum(var, floor))


def em_fit(data: Dataset, init: Gmm, cfg: EmConfig = EmConfig()) -> EmResult:
    """Refine `init` by EM on `data`.

    Stops once the relative log-likelihood gain drops below ``cfg.ll_tol``
    or after ``cfg.max_iters`` M-steps.  The trace holds the log-likelihood
    of every parameter set visited, the last entry being the returned model.
    """
    X = data.samples
    if X.shape[1] != init.d:
        raise ValueError(f"dimension mismatch: data d={X.shape[1]}, model d={init.d}")
    if data.T < init.K:
        raise ValueError(f"need at least as many samples ({data.T}) as components ({init.K})")
    if cfg.min_weight * init.K >= 1:
        raise ValueError(f"min_weight={cfg.min_weight} is infeasible for K={init.K}")
    floor = variance_floor(X, cfg.variance_floor_factor)

    model = init
    trace: list[EmIteration] = []
    n_var = n_w = 0
    for it in range(cfg.max_iters + 1):
        log_resp, ll = e_step(X, model)
        if not np.isfinite(ll):
            raise FloatingPointError(f"non-finite log-likelihood at EM iteration {it}")
        trace.append(EmIteration(it, ll, n_var, n_w))
        if it > 0:
            prev = trace[-2].log_likelihood
            if ll - prev < cfg.ll_tol * abs(prev):
                break
        if it == cfg.max_iters:
            break
        model, n_var, n_w = m_step(X, np.exp(log_resp), floor, cfg.min_weight)
    return EmResult(model=model, trace=trace)


def trace_csv(trace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("iteration", "log_likelihood", "num_floored_variances", "num_floored_weights"))
    for it in trace:
        writer.writerow((it.iteration, repr(it.log_likelihood), it.num_floored_variances,
                         it.num_floored_weights))
    return buf.getvalue()


def write_trace(path, trace) -> None:
    atomic_write(path, trace_csv(trace))
