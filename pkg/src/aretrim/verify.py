"""Monte Carlo checks of the distribution results behind the trimming rule.

Each suite returns a list of :class:`Check` records; the command-line
``verify`` command prints them and exits non-zero if any fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .core import Dataset, DiagGaussian, Gmm, make_rng
from .dispersion import (
    Metric,
    TrimPolicy,
    cluster_dof,
    dispersion_set,
    euclidean_dof,
    liu_chi2_approx,
)
from .kmeans import KmeansConfig, kmeans, trimmed_kmeans
from .special import (
    ChiSquareParams,
    chi2_cdf,
    chi2_normal_approx,
    chi_cdf,
    chi_normal_approx,
    chi_pdf,
    normal_cdf,
    normal_pdf,
)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    statistic: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"[{status}] {self.name}: {self.statistic:.6g} (threshold {self.threshold:g}){extra}"


def ks_distance(samples, cdf) -> float:
    return float(stats.kstest(np.asarray(samples), cdf).statistic)


def liu_suite(trials: int = 100_000, seed: int = 0) -> list[Check]:
    rng = make_rng(seed)
    checks = []

    lam = np.array([1.0, 2.0, 3.0])
    approx = liu_chi2_approx(lam, [1, 1, 1], [0, 0, 0])
    expected = 14.0**3 / 36.0**2
    checks.append(Check("liu central dof for lambda=(1,2,3)", approx.delta == 0 and
                        abs(approx.l - expected) <= 1e-12, abs(approx.l - expected), 1e-12,
                        f"l={approx.l:.12g}"))

    violations = 0
    for _ in range(10_000):
        d = int(rng.integers(2, 31))
        var = rng.uniform(0.01, 10.0, size=d)
        c2, c3, c4 = (np.sum(var**k) for k in (2, 3, 4))
        if (c3 / c2**1.5) ** 2 > c4 / c2**2:
            violations += 1
    checks.append(Check("s1^2 <= s2 on 10^4 random variance vectors", violations == 0, violations, 0))

    # shape agreement after matching the first two moments
    q = (rng.standard_normal((trials, 3)) ** 2) @ lam
    c1, c2 = lam.sum(), (lam**2).sum()
    z = (q - c1) / math.sqrt(2 * c2) * math.sqrt(2 * approx.l) + approx.l
    ks = ks_distance(z, lambda v: chi2_cdf(approx.l, np.maximum(v, 0.0)))
    checks.append(Check("liu standardized Q vs chi2(l) KS", ks < 0.05, ks, 0.05))
    return checks


def _diag_gaussian_draws(rng, g: DiagGaussian, n: int) -> np.ndarray:
    return g.mean + rng.standard_normal((n, g.d)) * np.sqrt(g.var)


def chi_suite(trials: int = 100_000, seed: int = 0, d: int = 20) -> list[Check]:
    rng = make_rng(seed)
    g = DiagGaussian(rng.normal(size=d), np.ones(d))
    model = Gmm.from_arrays([1.0], g.mean[None], g.var[None])
    X = _diag_gaussian_draws(rng, g, trials)
    y = dispersion_set(Dataset(X), model, Metric.EUCLIDEAN)
    nu = euclidean_dof(model)
    checks = [Check(f"euclidean dof for unit variances, d={d}", nu == d, nu, d)]
    ks = ks_distance(y * y, lambda v: chi2_cdf(nu, np.maximum(v, 0.0)))
    checks.append(Check("squared euclidean dispersion vs chi2(nu), identity covariance", ks < 0.01, ks, 0.01))
    ks = ks_distance(y, lambda v: chi_cdf(nu, np.maximum(v, 0.0)))
    checks.append(Check("euclidean dispersion vs chi(nu), identity covariance", ks < 0.01, ks, 0.01))

    # heterogeneous variances: chi-square shape after matching the mean
    var = rng.uniform(0.5, 2.0, size=d)
    X = rng.standard_normal((trials, d)) * np.sqrt(var)
    y2 = (X**2).sum(axis=1)
    nu_k = cluster_dof(var)
    ks_scaled = ks_distance(y2 * nu_k / var.sum(), lambda v: chi2_cdf(nu_k, np.maximum(v, 0.0)))
    ks_raw = ks_distance(y2, lambda v: chi2_cdf(nu_k, np.maximum(v, 0.0)))
    checks.append(Check("squared euclidean, heterogeneous variances, mean-matched KS", ks_scaled < 0.15,
                        ks_scaled, 0.15, f"nu={nu_k:.4f}, unscaled KS={ks_raw:.4f}"))
    return checks


def chi2_suite(trials: int = 100_000, seed: int = 0, d: int = 20) -> list[Check]:
    rng = make_rng(seed)
    g = DiagGaussian(rng.normal(size=d), rng.uniform(0.2, 5.0, size=d))
    model = Gmm.from_arrays([1.0], g.mean[None], g.var[None])
    X = _diag_gaussian_draws(rng, g, trials)
    y = dispersion_set(Dataset(X), model, Metric.MAHALANOBIS)
    ks = ks_distance(y, lambda v: chi2_cdf(d, np.maximum(v, 0.0)))
    return [Check(f"mahalanobis dispersion vs chi2({d})", ks < 0.01, ks, 0.01)]


def normal_approx_suite(trials: int = 100_000, seed: int = 0) -> list[Check]:
    rng = make_rng(seed)
    checks = []
    nu = 200
    approx = chi_normal_approx(nu)
    grid = np.linspace(0.0, 30.0, 300_001)
    p = chi_pdf(nu, grid)
    gap = float(np.max(np.abs(p - normal_pdf(approx, grid))) / p.max())
    checks.append(Check(f"chi({nu}) vs N(sqrt({nu - 1}), 1/2) pdf sup / peak", gap < 0.01, gap, 0.01))

    nu = 640
    draws = rng.chisquare(nu, size=trials)
    ks = ks_distance(draws, lambda v: normal_cdf(chi2_normal_approx(nu), v))
    checks.append(Check(f"chi2({nu}) draws vs N({nu}, {2 * nu}) KS", ks < 0.05, ks, 0.05))

    sup = float(np.max(np.abs(chi2_cdf(ChiSquareParams(nu), grid * 40)
                              - normal_cdf(chi2_normal_approx(nu), grid * 40))))
    checks.append(Check(f"chi2({nu}) vs normal cdf sup", sup < 0.02, sup, 0.02))
    return checks


@dataclass(frozen=True)
class BreakdownScene:
    data: Dataset
    means: np.ndarray
    outlier_index: int
    sigma: float
    n_per_blob: int


def breakdown_scene(seed: int, n_per_blob: int = 500, gap: float = 10.0, sigma: float = 1.0,
                    outlier_distance: float = 1e4) -> BreakdownScene:
    """Two separated 2-d blobs plus one gross outlier belonging to the first."""
    rng = make_rng(seed)
    means = np.array([[0.0, 0.0], [gap, 0.0]])
    blobs = [m + sigma * rng.standard_normal((n_per_blob, 2)) for m in means]
    outlier = means[0] - np.array([outlier_distance, 0.0])
    X = np.vstack(blobs + [outlier[None]])
    return BreakdownScene(Dataset(X), means, X.shape[0] - 1, sigma, n_per_blob)


def means_recovered(centroids: np.ndarray, scene: BreakdownScene, n_se: float = 3.0) -> bool:
    """Every true mean has a centroid within n_se standard errors in each coordinate."""
    se = scene.sigma / math.sqrt(scene.n_per_blob)
    return all(np.any(np.all(np.abs(centroids - m) <= n_se * se, axis=1)) for m in scene.means)


def broken_down(centroids: np.ndarray, scene: BreakdownScene) -> bool:
    """Some centroid lies more than half the blob gap from every true mean."""
    gap = float(np.linalg.norm(scene.means[1] - scene.means[0]))
    dist = np.linalg.norm(centroids[:, None, :] - scene.means[None], axis=2)
    return bool(np.any(dist.min(axis=1) > 0.5 * gap))


def breakdown_suite(trials: int = 100, seed: int = 0, tau: float = 0.96) -> list[Check]:
    seeds = [seed + i for i in range(trials)]
    conv_broken = trim_ok = trimmed_outlier = 0
    policy = TrimPolicy(Metric.EUCLIDEAN, tau)
    for s in seeds:
        scene = breakdown_scene(s)
        cfg = KmeansConfig(k=2, seed=s)
        conv_broken += broken_down(kmeans(scene.data, cfg).centroids, scene)
        tk = trimmed_kmeans(scene.data, cfg, policy)
        trim_ok += means_recovered(tk.centroids, scene)
        trimmed_outlier += not tk.retained[scene.outlier_index]
    n = len(seeds)
    return [
        Check("conventional k-means breaks down", conv_broken >= 0.5 * n, conv_broken / n, 0.5),
        Check(f"trimmed k-means (tau={tau}) recovers both means", trim_ok >= 0.95 * n, trim_ok / n, 0.95),
        Check("outlier trimmed in every run", trimmed_outlier == n, trimmed_outlier / n, 1.0),
    ]


SUITES = {
    "liu": liu_suite,
    "chi": chi_suite,
    "chi2": chi2_suite,
    "normal-approx": normal_approx_suite,
    "breakdown": breakdown_suite,
}

