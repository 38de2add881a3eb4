"""Seeded GMM sampling and outlier contamination."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset, Gmm, make_rng

MODES = ("uniform_box", "shifted_gaussian", "point_mass")


@dataclass(frozen=True)
class ContaminationSpec:
    rate: float = 0.0
    mode: str = "point_mass"
    scale: float = 10.0

    def __post_init__(self):
        if not 0 <= self.rate < 1:
            raise ValueError(f"contamination rate must lie in [0, 1), got {self.rate}")
        if self.mode not in MODES:
            raise ValueError(f"unknown contamination mode {self.mode!r}; expected one of {MODES}")
        if not self.scale > 0:
            raise ValueError(f"contamination scale must be positive, got {self.scale}")


def sample_gmm(model: Gmm, n: int, seed: int) -> tuple[Dataset, np.ndarray]:
    """n i.i.d. draws and the index of the component that produced each."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    rng = make_rng(seed)
    labels = rng.choice(model.K, size=n, p=model.weights)
    noise = rng.standard_normal((n, model.d))
    X = model.means[labels] + noise * np.sqrt(model.variances[labels])
    return Dataset(X), labels


def n_outliers(rate: float, T: int) -> int:
    # guard against 0.07 * 100 == 7.000000000000001
    return math.ceil(rate * T - 1e-9) if rate > 0 else 0


def bounding_radius(X: np.ndarray) -> float:
    """Largest distance of a sample from the sample centroid."""
    return float(np.sqrt(((X - X.mean(axis=0)) ** 2).sum(axis=1)).max())


def _unit_vector(rng, d):
    while True:
        u = rng.standard_normal(d)
        norm = np.linalg.norm(u)
        if norm > 0:
            return u / norm


def contaminate(clean: Dataset, spec: ContaminationSpec, seed: int) -> tuple[Dataset, np.ndarray]:
    """Replace ceil(rate * T) uniformly chosen samples by outliers.

    Returns the contaminated dataset and a mask that is True at outliers.
    Outliers are placed relative to the clean centroid and bounding radius R:

    * ``uniform_box``: uniform in the cube of half-width scale * R.
    * ``shifted_gaussian``: the replaced samples shifted by scale * R along
      one random direction.
    * ``point_mass``: every outlier at the single point centroid + scale * R * u.
    """
    X = clean.samples.copy()
    T, d = X.shape
    n = n_outliers(spec.rate, T)
    mask = np.zeros(T, dtype=bool)
    if n == 0:
        return Dataset(X), mask
    if n >= T:
        raise ValueError(f"rate {spec.rate} would replace all {T} samples")
    rng = make_rng(seed)
    idx = np.sort(rng.choice(T, size=n, replace=False))
    center = X.mean(axis=0)
    reach = spec.scale * bounding_radius(X)
    if spec.mode == "uniform_box":
        X[idx] = center + rng.uniform(-reach, reach, size=(n, d))
    elif spec.mode == "shifted_gaussian":
        X[idx] = X[idx] + reach * _unit_vector(rng, d)
    else:
        X[idx] = center + reach * _unit_vector(rng, d)
    mask[idx] = True
    return Dataset(X), mask
