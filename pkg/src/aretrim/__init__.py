"""Robust GMM estimation with automatic, dispersion-based outlier trimming."""

from .core import Dataset, DiagGaussian, Gmm, load_dataset, load_gmm, log_density, save_dataset, save_gmm
from .dispersion import DispersionModel, Metric, TrimPolicy, trim, trim_mask
from .em import EmConfig, em_fit, gmm_from_clustering
from .kmeans import Clustering, KmeansConfig, kmeans, trimmed_kmeans
from .pipeline import TrainConfig, TrainedModel, classify, train, train_are_trim, train_conventional
from .synth import ContaminationSpec, contaminate, sample_gmm

__version__ = "0.1.0"

__all__ = [
    "Clustering", "ContaminationSpec", "Dataset", "DiagGaussian", "DispersionModel", "EmConfig",
    "Gmm", "KmeansConfig", "Metric", "TrainConfig", "TrainedModel", "TrimPolicy", "classify",
    "contaminate", "em_fit", "gmm_from_clustering", "kmeans", "load_dataset", "load_gmm",
    "log_density", "sample_gmm", "save_dataset", "save_gmm", "train", "train_are_trim",
    "train_conventional", "trim", "trim_mask", "trimmed_kmeans",
]
