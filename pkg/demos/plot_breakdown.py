"""
One far outlier against K-means
===============================

Two tight blobs and a single point placed far to the left.  Plain K-means
spends a centroid on the outlier; trimmed K-means drops it and finds both
blobs.
"""

# %%
import numpy as np

from aretrim.dispersion import Metric, TrimPolicy
from aretrim.kmeans import KmeansConfig, kmeans, trimmed_kmeans
from aretrim.verify import breakdown_scene, broken_down, means_recovered

scene = breakdown_scene(seed=0)
print("true means:\n", scene.means)
print("outlier at", scene.data.samples[scene.outlier_index])

# %%
cfg = KmeansConfig(k=2, seed=0)
plain = kmeans(scene.data, cfg)
print("plain k-means centroids:\n", plain.centroids.round(3))
print("broken down:", broken_down(plain.centroids, scene))

# %% [markdown]
# The trimmed run re-evaluates which samples are outliers at every
# iteration, against the current centroids.

# %%
trimmed = trimmed_kmeans(scene.data, cfg, TrimPolicy(Metric.EUCLIDEAN, 0.96))
print("trimmed k-means centroids:\n", trimmed.centroids.round(3))
print("both means within 3 standard errors:", means_recovered(trimmed.centroids, scene))
print("outlier trimmed:", not trimmed.retained[scene.outlier_index])
print(f"retained fraction: {trimmed.retained.mean():.3f}")

# %% [markdown]
# Over many seeds.

# %%
runs = 100
plain_broken = trimmed_ok = 0
for s in range(runs):
    sc = breakdown_scene(s)
    c = KmeansConfig(k=2, seed=s)
    plain_broken += broken_down(kmeans(sc.data, c).centroids, sc)
    trimmed_ok += means_recovered(trimmed_kmeans(sc.data, c, TrimPolicy(Metric.EUCLIDEAN, 0.96)).centroids, sc)
print(f"plain k-means broke down in {plain_broken}/{runs} runs")
print(f"trimmed k-means recovered both means in {trimmed_ok}/{runs} runs")
