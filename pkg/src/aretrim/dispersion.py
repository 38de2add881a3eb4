"""Dispersion degrees of samples w.r.t. a mixture, their distribution, and trimming.

A sample's dispersion degree is its distance to the mixture component that
explains it best (unweighted component density).  Two measures are used:
the Euclidean distance ||x - mu|| and the Mahalanobis quadratic form
(x - mu)' diag(var)^-1 (x - mu).  Note the first is a distance and the
second a squared distance.

Outliers are identified by fitting a normal law to the observed dispersion
degrees and flagging every sample whose lower-tail probability exceeds a
threshold ``tau``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import Dataset, DiagGaussian, Gmm, atomic_write, component_log_densities
from .special import (
    ChiParams,
    ChiSquareParams,
    NormalParams,
    chi2_normal_approx,
    chi_normal_approx,
    normal_cdf,
)


class Metric(str, Enum):
    EUCLIDEAN = "euclidean"
    MAHALANOBIS = "mahalanobis"


class DegenerateError(ValueError):
    """Raised when a computation has no well-defined answer for its input."""


class TrimError(ValueError):
    """Raised when the trimming rule would discard every sample."""


@dataclass(frozen=True)
class TrimPolicy:
    metric: Metric = Metric.EUCLIDEAN
    tau: float = 0.96

    def __post_init__(self):
        object.__setattr__(self, "metric", Metric(self.metric))
        if not 0 < self.tau <= 1:
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")

    @property
    def disabled(self) -> bool:
        return self.tau >= 1.0


@dataclass(frozen=True)
class DispersionModel:
    """Normal law fitted to observed dispersion degrees."""

    metric: Metric | None
    mu_hat: float
    sigma_hat: float
    n_fit: int

    @property
    def normal(self) -> NormalParams:
        return NormalParams(self.mu_hat, self.sigma_hat**2)


@dataclass(frozen=True)
class ChiSquareApprox:
    l: float  # noqa: E741
    delta: float
    a: float | None = None


@dataclass(frozen=True)
class TheoreticalModel:
    metric: Metric
    nu: float
    exact: ChiParams | ChiSquareParams
    normal: NormalParams | None

    def cdf(self, y):
        return self.exact.cdf(y)


@dataclass(frozen=True, eq=False)
class TrimResult:
    retained: np.ndarray
    dispersions: np.ndarray
    labels: np.ndarray
    cdf: np.ndarray
    model: DispersionModel | None

    @property
    def retained_fraction(self) -> float:
        return float(self.retained.mean())


def dispersion_point(x, cluster: DiagGaussian, metric=Metric.EUCLIDEAN) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != cluster.mean.shape:
        raise ValueError(f"dimension mismatch: x has shape {x.shape}, cluster has d={cluster.d}")
    diff2 = (x - cluster.mean) ** 2
    if Metric(metric) is Metric.EUCLIDEAN:
        return float(math.sqrt(diff2.sum()))
    return float((diff2 / cluster.var).sum())


def assign_classes(X, model: Gmm) -> np.ndarray:
    """Index of the component with the largest unweighted density, per row.

    Ties go to the lowest index.
    """
    return np.argmax(component_log_densities(model, X), axis=1)


def assign_class(x, model: Gmm) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.d,):
        raise ValueError(f"dimension mismatch: x has shape {x.shape}, model has d={model.d}")
    return int(assign_classes(x[None, :], model)[0])


def dispersion_set(data: Dataset, model: Gmm, metric=Metric.EUCLIDEAN, return_labels: bool = False):
    """Dispersion degree of every sample against its assigned component."""
    X = data.samples if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    labels = assign_classes(X, model)
    diff2 = (X - model.means[labels]) ** 2
    if Metric(metric) is Metric.EUCLIDEAN:
        y = np.sqrt(diff2.sum(axis=1))
    else:
        y = (diff2 / model.variances[labels]).sum(axis=1)
    return (y, labels) if return_labels else y


def liu_chi2_approx(lambdas, hs, deltas) -> ChiSquareApprox:
    """Chi-square approximation of sum_i lambda_i * chi2_{h_i}(delta_i) from its cumulants.

    Matches the skewness-type ratios s1 = c3 / c2^1.5 and s2 = c4 / c2^2,
    with c_k = sum lambda^k h + k sum lambda^k delta.  The returned (l, delta)
    describe shape only; the mean of the weighted sum is c1, not l + delta.
    """
    lam = np.atleast_1d(np.asarray(lambdas, dtype=np.float64))
    h = np.atleast_1d(np.asarray(hs, dtype=np.float64))
    dl = np.atleast_1d(np.asarray(deltas, dtype=np.float64))
    if lam.size < 1 or not lam.shape == h.shape == dl.shape:
        raise ValueError("lambdas, hs and deltas must be equal-length, non-empty vectors")
    if np.any(h <= 0) or np.any(dl < 0):
        raise ValueError("degrees of freedom must be positive and non-centralities nonnegative")
    c = {k: float(np.sum(lam**k * h) + k * np.sum(lam**k * dl)) for k in (2, 3, 4)}
    if c[2] == 0 or c[3] == 0:
        raise DegenerateError("cumulants c2 or c3 vanish; no chi-square approximation")
    s1 = c[3] / c[2] ** 1.5
    s2 = c[4] / c[2] ** 2
    # equality holds analytically for equal weights; don't let rounding flip the branch
    if s1 * s1 <= s2 * (1.0 + 1e-12):
        l = c[2] ** 3 / c[3] ** 2  # noqa: E741
        return ChiSquareApprox(l=l, delta=0.0)
    a = 1.0 / (s1 - math.sqrt(s1 * s1 - s2))
    delta = s1 * a**3 - a**2
    l = a**2 - 2.0 * delta  # noqa: E741
    if l <= 0 or delta < 0:
        raise DegenerateError(f"non-central branch gave l={l}, delta={delta}")
    return ChiSquareApprox(l=l, delta=delta, a=a)


def cluster_dof(var) -> float:
    """Degrees of freedom of ||x - mu||^2 for one diagonal cluster: (sum s^4)^3 / (sum s^6)^2."""
    var = np.asarray(var, dtype=np.float64)
    return float(np.sum(var**2) ** 3 / np.sum(var**3) ** 2)


def euclidean_dof(model: Gmm) -> float:
    return float(sum(cluster_dof(c.var) for c in model.components))


def mahalanobis_dof(model: Gmm) -> float:
    return float(model.d * model.K)


def theoretical_model(model: Gmm, metric=Metric.EUCLIDEAN) -> TheoreticalModel:
    """Chi law (Euclidean) or chi-square law (Mahalanobis) with its normal surrogate.

    The Euclidean surrogate is ``None`` when nu <= 1.
    """
    metric = Metric(metric)
    if metric is Metric.EUCLIDEAN:
        nu = euclidean_dof(model)
        exact = ChiParams(nu)
        normal = chi_normal_approx(exact) if nu > 1 else None
    else:
        nu = mahalanobis_dof(model)
        exact = ChiSquareParams(nu)
        normal = chi2_normal_approx(exact)
    return TheoreticalModel(metric=metric, nu=nu, exact=exact, normal=normal)


def fit_empirical(dispersions, metric: Metric | None = None) -> DispersionModel:
    """Sample mean and (T-1)-normalised standard deviation."""
    y = np.asarray(dispersions, dtype=np.float64).ravel()
    if y.size < 2:
        raise ValueError(f"need at least 2 dispersion values, got {y.size}")
    mu = float(y.sum() / y.size)
    sigma = float(math.sqrt(np.sum((y - mu) ** 2) / (y.size - 1)))
    if not sigma > 0:
        raise DegenerateError("degenerate dispersion sample: all values identical")
    return DispersionModel(metric=None if metric is None else Metric(metric),
                           mu_hat=mu, sigma_hat=sigma, n_fit=int(y.size))


def is_outlier(y, m: DispersionModel, tau: float):
    """True where the fitted lower-tail probability of `y` exceeds `tau`."""
    if not 0 < tau <= 1:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    out = normal_cdf(m.normal, y) > tau
    return bool(out) if np.ndim(out) == 0 else out


def centroid_model(centroids, variances=None) -> Gmm:
    """Equal-weight mixture placed at `centroids`, unit variances unless given."""
    centroids = np.atleast_2d(np.asarray(centroids, dtype=np.float64))
    K = centroids.shape[0]
    if variances is None:
        variances = np.ones_like(centroids)
    return Gmm.from_arrays(np.full(K, 1.0 / K), centroids, variances)


def trim(data: Dataset, model, policy: TrimPolicy) -> TrimResult:
    """Apply the dispersion-degree outlier rule to every sample.

    `model` is a Gmm, or an array of centroids (read as unit-variance
    components).  With tau = 1 every sample is retained; the dispersion
    model is still fitted when the sample allows it.
    """
    if not isinstance(model, Gmm):
        model = centroid_model(model)
    y, labels = dispersion_set(data, model, policy.metric, return_labels=True)
    try:
        fitted = fit_empirical(y, policy.metric)
    except (ValueError, DegenerateError):
        if not policy.disabled:
            raise
        return TrimResult(np.ones(y.size, dtype=bool), y, labels, np.full(y.size, np.nan), None)
    cdf = normal_cdf(fitted.normal, y)
    retained = ~(cdf > policy.tau)
    if not retained.any():
        raise TrimError("trim threshold removed entire dataset")
    return TrimResult(retained, y, labels, cdf, fitted)


def trim_mask(data: Dataset, model, policy: TrimPolicy) -> np.ndarray:
    """Boolean mask, True for samples kept for training."""
    return trim(data, model, policy).retained


def dispersion_table(data: Dataset, model: Gmm, metric=Metric.EUCLIDEAN, tau: float = 1.0):
    """Rows of the per-sample dispersion export plus the fitted/theoretical models."""
    metric = Metric(metric)
    res = trim(data, model, TrimPolicy(metric, tau))
    theo = theoretical_model(model, metric)
    cdf_theo = np.asarray(theo.cdf(res.dispersions), dtype=np.float64)
    rows = [
        (t, int(res.labels[t]), float(res.dispersions[t]), float(res.cdf[t]),
         float(cdf_theo[t]), int(not res.retained[t]))
        for t in range(data.T)
    ]
    return rows, res.model, theo


EXPORT_COLUMNS = ("sample_index", "cluster_index", "dispersion", "cdf_empirical",
                  "cdf_theoretical", "is_outlier")


def export_dispersion(path, data: Dataset, model: Gmm, metric=Metric.EUCLIDEAN, tau: float = 1.0) -> None:
    """Write the per-sample dispersion CSV with a commented header of model values."""
    rows, fitted, theo = dispersion_table(data, model, metric, tau)
    buf = io.StringIO()
    buf.write(f"# metric={Metric(metric).value} nu_theoretical={theo.nu!r} tau={tau!r}\n")
    if fitted is not None:
        buf.write(f"# mu_hat={fitted.mu_hat!r} sigma_hat={fitted.sigma_hat!r} n_fit={fitted.n_fit}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EXPORT_COLUMNS)
    for r in rows:
        writer.writerow([r[0], r[1], repr(r[2]), repr(r[3]), repr(r[4]), r[5]])
    atomic_write(path, buf.getvalue())
