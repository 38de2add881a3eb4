"""
The dispersion degree of a sample
=================================

How far a sample lies from the Gaussian it is assigned to, and what
distribution that distance follows when the data is clean.
"""

# %%
import numpy as np
from scipy.stats import norm

from aretrim.core import Dataset, Gmm
from aretrim.dispersion import Metric, dispersion_set, euclidean_dof, fit_empirical, theoretical_model
from aretrim.special import chi2_cdf, chi_cdf
from aretrim.synth import sample_gmm
from aretrim.verify import ks_distance

rng = np.random.default_rng(0)

# %% [markdown]
# A single 20-dimensional diagonal Gaussian with unequal variances.

# %%
d = 20
g = Gmm.from_arrays([1.0], rng.normal(size=(1, d)), rng.uniform(0.2, 5.0, size=(1, d)))
data, _ = sample_gmm(g, 100_000, seed=1)

# %% [markdown]
# Under the Mahalanobis metric the dispersion is the squared, variance
# scaled distance.  Against the true parameters it is exactly chi-square
# with d degrees of freedom.

# %%
y = dispersion_set(data, g, Metric.MAHALANOBIS)
theo = theoretical_model(g, Metric.MAHALANOBIS)
print("nu =", theo.nu)
print("KS to chi2(nu):", ks_distance(y, lambda v: chi2_cdf(theo.nu, np.maximum(v, 0))))

# %% [markdown]
# The Euclidean dispersion is a plain distance.  With unequal variances
# its law is only approximately chi, with an effective number of degrees
# of freedom below d.

# %%
y_e = dispersion_set(data, g, Metric.EUCLIDEAN)
nu_e = euclidean_dof(g)
print(f"effective nu = {nu_e:.3f} (d = {d})")
scale = np.sqrt(nu_e / g.variances.sum())
print("KS to chi(nu) after matching the mean square:",
      ks_distance(y_e * scale, lambda v: chi_cdf(nu_e, np.maximum(v, 0))))

# %% [markdown]
# The trimming rule does not use either law directly.  It fits a normal
# to the observed dispersions and cuts the upper tail.

# %%
m = fit_empirical(y, Metric.MAHALANOBIS)
print(f"fitted normal: mu_hat={m.mu_hat:.3f}, sigma_hat={m.sigma_hat:.3f}")
print(f"normal surrogate of chi2({theo.nu:g}): mean {theo.normal.mu:g}, sd {theo.normal.sigma:.3f}")

for tau in (0.99, 0.96, 0.9, 0.8):
    cut = norm.ppf(tau, loc=m.mu_hat, scale=m.sigma_hat)
    print(f"tau={tau:.2f}: dispersion cut {cut:7.3f}, fraction above it {np.mean(y > cut):.4f}")
