"""Conventional and ARE-TRIM GMM training, ML classification, and the synthetic benchmark."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from .core import Dataset, Gmm, component_log_densities
from .dispersion import (
    DegenerateError,
    DispersionModel,
    Metric,
    TrimPolicy,
    euclidean_dof,
    fit_empirical,
    dispersion_set,
    mahalanobis_dof,
    trim,
)
from .em import EmConfig, em_fit, gmm_from_clustering
from .kmeans import KmeansConfig, kmeans, trimmed_kmeans
from .synth import ContaminationSpec, contaminate, sample_gmm

logger = logging.getLogger(__name__)

MAX_RECLUSTER = 10
DEFAULT_TAU = {Metric.EUCLIDEAN: 0.96, Metric.MAHALANOBIS: 0.92}


@dataclass(frozen=True)
class TrainConfig:
    k: int = 32
    seed: int = 0
    kmeans_max_iters: int = 100
    kmeans_tol: float = 1e-6
    em: EmConfig = field(default_factory=EmConfig)
    policy: TrimPolicy | None = None
    em_retrim: bool = True

    @property
    def kmeans(self) -> KmeansConfig:
        return KmeansConfig(k=self.k, max_iters=self.kmeans_max_iters,
                            convergence_tol=self.kmeans_tol, seed=self.seed,
                            trim_variance_floor=self.em.variance_floor_factor)


@dataclass(frozen=True, eq=False)
class TrainedModel:
    model: Gmm
    retained_fraction: float
    retained: np.ndarray
    dispersion: DispersionModel | None
    nu_theoretical: dict
    ll_trace: list
    method: str

    def report(self) -> dict:
        disp = self.dispersion
        return {
            "method": self.method,
            "retained_fraction": self.retained_fraction,
            "nu_theoretical": self.nu_theoretical,
            "dispersion_metric": None if disp is None or disp.metric is None else disp.metric.value,
            "mu_hat": None if disp is None else disp.mu_hat,
            "sigma_hat": None if disp is None else disp.sigma_hat,
            "ll_trace": [
                {"iteration": it.iteration, "log_likelihood": it.log_likelihood,
                 "num_floored_variances": it.num_floored_variances,
                 "num_floored_weights": it.num_floored_weights}
                for it in self.ll_trace
            ],
        }


def _check_size(data: Dataset, cfg: TrainConfig):
    if data.T < cfg.k:
        raise ValueError(f"need at least k={cfg.k} samples, got {data.T}")


def _nu(model: Gmm) -> dict:
    return {Metric.EUCLIDEAN.value: euclidean_dof(model), Metric.MAHALANOBIS.value: mahalanobis_dof(model)}


def _fit_report(data: Dataset, model: Gmm, metric: Metric) -> DispersionModel | None:
    try:
        return fit_empirical(dispersion_set(data, model, metric), metric)
    except (ValueError, DegenerateError):
        return None


def _initialise(data: Dataset, cfg: TrainConfig, cluster) -> tuple:
    # a cluster with < 2 members has no variance estimate: re-cluster from another seed
    seeds = [cfg.seed] + _child_seeds(cfg.seed, MAX_RECLUSTER - 1)
    for attempt, seed in enumerate(seeds):
        c = cluster(data, replace(cfg.kmeans, seed=seed))
        try:
            return c, gmm_from_clustering(data, c, cfg.em.variance_floor_factor, cfg.em.min_weight)
        except ValueError as exc:
            if attempt == len(seeds) - 1:
                raise
            logger.debug("re-clustering (attempt %d): %s", attempt + 1, exc)


def train_conventional(data: Dataset, cfg: TrainConfig) -> TrainedModel:
    """K-means initialisation followed by EM on the full dataset."""
    if cfg.policy is not None and not cfg.policy.disabled:
        raise ValueError("conventional training takes no trimming policy (or tau = 1)")
    _check_size(data, cfg)
    _, init = _initialise(data, cfg, kmeans)
    res = em_fit(data, init, cfg.em)
    metric = cfg.policy.metric if cfg.policy is not None else Metric.EUCLIDEAN
    return TrainedModel(model=res.model, retained_fraction=1.0, retained=np.ones(data.T, dtype=bool),
                        dispersion=_fit_report(data, res.model, metric), nu_theoretical=_nu(res.model),
                        ll_trace=res.trace, method="conventional")


def train_are_trim(data: Dataset, cfg: TrainConfig) -> TrainedModel:
    """Trimmed K-means initialisation, dispersion-based trimming, then EM.

    With ``cfg.em_retrim`` the trim rule is re-applied against the
    initialised GMM and EM runs on the retained samples only; otherwise EM
    sees every sample.
    """
    if cfg.policy is None:
        raise ValueError("ARE-TRIM training needs a trimming policy")
    _check_size(data, cfg)
    c, init = _initialise(data, cfg, lambda d, kc: trimmed_kmeans(d, kc, cfg.policy))
    dispersion = None
    if cfg.em_retrim:
        tr = trim(data, init, cfg.policy)
        retained, dispersion = tr.retained, tr.model
        train = data.subset(retained)
    else:
        retained = c.retained
        train = data
    res = em_fit(train, init, cfg.em)
    return TrainedModel(model=res.model, retained_fraction=float(retained.mean()), retained=retained,
                        dispersion=dispersion, nu_theoretical=_nu(res.model), ll_trace=res.trace,
                        method="are-trim")


def train(data: Dataset, cfg: TrainConfig) -> TrainedModel:
    return train_conventional(data, cfg) if cfg.policy is None else train_are_trim(data, cfg)


def gmm_log_likelihood(X: np.ndarray, model: Gmm) -> np.ndarray:
    """Per-frame weighted mixture log-likelihood."""
    with np.errstate(divide="ignore"):
        return logsumexp(component_log_densities(model, X) + np.log(model.weights), axis=1)


@dataclass(frozen=True, eq=False)
class Classification:
    labels: list
    scores: np.ndarray  # (n_chunks, n_models) summed log-likelihoods
    model_labels: list


def split_chunks(data: Dataset, chunk_len: int) -> list[Dataset]:
    """Consecutive chunks of `chunk_len` samples; the last one may be shorter."""
    if chunk_len < 1:
        raise ValueError(f"chunk_len must be positive, got {chunk_len}")
    return [data.subset(slice(i, i + chunk_len)) for i in range(0, data.T, chunk_len)]


def classify(chunks: Sequence[Dataset] | Dataset, models) -> Classification:
    """Pick, for every chunk, the model with the largest total log-likelihood.

    `models` is a mapping label -> Gmm or a sequence of (label, Gmm) pairs;
    ties go to the earliest model.
    """
    pairs = list(models.items()) if isinstance(models, Mapping) else list(models)
    if not pairs:
        raise ValueError("need at least one model")
    if isinstance(chunks, Dataset):
        chunks = [chunks]
    scores = np.empty((len(chunks), len(pairs)))
    for i, chunk in enumerate(chunks):
        X = chunk.samples if isinstance(chunk, Dataset) else np.asarray(chunk, dtype=np.float64)
        if X.size == 0:
            raise ValueError(f"chunk {i} is empty")
        for j, (_, g) in enumerate(pairs):
            scores[i, j] = gmm_log_likelihood(X, g).sum()
    best = np.argmax(scores, axis=1)
    labels = [pairs[j][0] for j in best]
    return Classification(labels=labels, scores=scores, model_labels=[p[0] for p in pairs])


# ---------------------------------------------------------------------------
# benchmark


class SpecError(ValueError):
    """Invalid benchmark spec; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class BenchmarkSpec:
    num_classes: int = 10
    dim: int = 20
    samples_per_class: int = 1000
    test_chunks_per_class: int = 20
    chunk_len: int = 5
    contamination: ContaminationSpec = field(default_factory=ContaminationSpec)
    tau_grid: tuple = (1.0,)
    metrics: tuple = (Metric.EUCLIDEAN,)
    seeds: tuple = (0,)
    k: int = 8
    em: EmConfig = field(default_factory=EmConfig)
    # generative model of each class: `components` diagonal Gaussians with
    # means ~ N(0, mean_spread^2 I) and variances ~ U(var_range)
    components: int | None = None
    mean_spread: float = 1.0
    var_range: tuple = (0.5, 1.5)

    @classmethod
    def from_dict(cls, obj: dict) -> "BenchmarkSpec":
        if not isinstance(obj, dict):
            raise SpecError("$", "benchmark spec must be a JSON object")

        def get(key, typ, default=None, required=False, path=None):
            path = path or key
            if key not in obj:
                if required:
                    raise SpecError(path, "missing required field")
                return default
            val = obj[key]
            if typ is int and (isinstance(val, bool) or not isinstance(val, int)):
                raise SpecError(path, f"expected integer, got {val!r}")
            if typ is float and (isinstance(val, bool) or not isinstance(val, (int, float))):
                raise SpecError(path, f"expected number, got {val!r}")
            return val

        def positive(key, default, required=False):
            v = get(key, int, default, required)
            if v < 1:
                raise SpecError(key, f"must be a positive integer, got {v}")
            return v

        cont = obj.get("contamination", {})
        if not isinstance(cont, dict):
            raise SpecError("contamination", "expected an object")
        try:
            contamination = ContaminationSpec(
                rate=float(cont.get("rate", 0.0)), mode=cont.get("mode", "point_mass"),
                scale=float(cont.get("scale", 10.0)))
        except (TypeError, ValueError) as exc:
            raise SpecError("contamination", str(exc)) from None

        def float_list(key, default):
            vals = obj.get(key, default)
            if not isinstance(vals, list) or not vals:
                raise SpecError(key, "expected a non-empty list")
            for i, v in enumerate(vals):
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise SpecError(f"{key}[{i}]", f"expected number, got {v!r}")
            return vals

        taus = tuple(float(t) for t in float_list("tau_grid", [1.0]))
        for i, t in enumerate(taus):
            if not 0 < t <= 1:
                raise SpecError(f"tau_grid[{i}]", f"tau must lie in (0, 1], got {t}")
        seeds = obj.get("seeds", [0])
        if not isinstance(seeds, list) or not seeds:
            raise SpecError("seeds", "expected a non-empty list")
        for i, s in enumerate(seeds):
            if isinstance(s, bool) or not isinstance(s, int) or not 0 <= s < 2**64:
                raise SpecError(f"seeds[{i}]", f"expected a 64-bit unsigned integer, got {s!r}")
        metrics = obj.get("metrics", ["euclidean"])
        if not isinstance(metrics, list) or not metrics:
            raise SpecError("metrics", "expected a non-empty list")
        try:
            metrics = tuple(Metric(m) for m in metrics)
        except ValueError as exc:
            raise SpecError("metrics", str(exc)) from None
        em_obj = obj.get("em", {})
        if not isinstance(em_obj, dict):
            raise SpecError("em", "expected an object")
        unknown = set(em_obj) - {"max_iters", "ll_tol", "variance_floor_factor", "min_weight"}
        if unknown:
            raise SpecError(f"em.{sorted(unknown)[0]}", "unknown field")
        try:
            em = EmConfig(**em_obj)
        except (TypeError, ValueError) as exc:
            raise SpecError("em", str(exc)) from None
        var_range = tuple(float(v) for v in obj.get("var_range", [0.5, 1.5]))
        if len(var_range) != 2 or not 0 < var_range[0] <= var_range[1]:
            raise SpecError("var_range", "expected [low, high] with 0 < low <= high")
        k = positive("k", 8)
        components = obj.get("components")
        if components is not None and (isinstance(components, bool) or not isinstance(components, int)
                                       or components < 1):
            raise SpecError("components", f"must be a positive integer, got {components!r}")
        spec = cls(
            num_classes=positive("num_classes", 10), dim=positive("dim", 20),
            samples_per_class=positive("samples_per_class", 1000),
            test_chunks_per_class=positive("test_chunks_per_class", 20),
            chunk_len=positive("chunk_len", 5), contamination=contamination,
            tau_grid=taus, metrics=metrics, seeds=tuple(seeds), k=k, em=em,
            components=components, mean_spread=float(get("mean_spread", float, 1.0)),
            var_range=var_range,
        )
        if spec.samples_per_class < spec.k:
            raise SpecError("samples_per_class", f"must be at least k={spec.k}")
        return spec

    @classmethod
    def load(cls, path) -> "BenchmarkSpec":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SpecError("$", f"invalid JSON ({exc.msg} at line {exc.lineno})") from None
        return cls.from_dict(obj)


@dataclass(frozen=True)
class BenchmarkRow:
    method: str
    metric: str
    tau: float
    seed: int
    accuracy: float
    mean_retained_fraction: float
    mean_train_seconds: float


RESULT_COLUMNS = ("method", "metric", "tau", "seed", "accuracy", "mean_retained_fraction",
                  "mean_train_seconds")


def _child_seeds(seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n, dtype=np.uint64)]


def class_models(spec: BenchmarkSpec, seed: int) -> list[Gmm]:
    """Generative GMM of every class for one benchmark seed."""
    rng = np.random.default_rng(_child_seeds(seed, 1)[0])
    K = spec.components or spec.k
    out = []
    for _ in range(spec.num_classes):
        means = rng.normal(0.0, spec.mean_spread, size=(K, spec.dim))
        var = rng.uniform(*spec.var_range, size=(K, spec.dim))
        w = rng.dirichlet(np.full(K, 5.0))
        out.append(Gmm.from_arrays(w / w.sum(), means, var))
    return out


def benchmark_data(spec: BenchmarkSpec, seed: int):
    """Contaminated training sets and clean test chunks for one seed.

    Returns (train_sets, outlier_masks, test_chunks, test_labels).
    """
    models = class_models(spec, seed)
    seeds = _child_seeds(seed, 3 * spec.num_classes + 1)[1:]
    train_sets, masks, chunks, labels = [], [], [], []
    for c, g in enumerate(models):
        clean, _ = sample_gmm(g, spec.samples_per_class, seeds[3 * c])
        dirty, mask = contaminate(clean, spec.contamination, seeds[3 * c + 1])
        train_sets.append(dirty)
        masks.append(mask)
        test, _ = sample_gmm(g, spec.test_chunks_per_class * spec.chunk_len, seeds[3 * c + 2])
        chunks.extend(split_chunks(test, spec.chunk_len))
        labels.extend([c] * spec.test_chunks_per_class)
    return train_sets, masks, chunks, labels


def _evaluate(train_sets, chunks, truth, cfg: TrainConfig):
    trained, secs = [], []
    for data in train_sets:
        t0 = time.perf_counter()
        trained.append(train(data, cfg))
        secs.append(time.perf_counter() - t0)
    result = classify(chunks, [(c, tm.model) for c, tm in enumerate(trained)])
    acc = float(np.mean(np.asarray(result.labels) == np.asarray(truth)))
    return acc, float(np.mean([tm.retained_fraction for tm in trained])), float(np.mean(secs))


def run_benchmark(spec: BenchmarkSpec) -> list[BenchmarkRow]:
    """Accuracy of conventional and ARE-TRIM training per (metric, tau, seed).

    The same k-means seed is used by every method within a seed, so the
    comparison is paired.
    """
    rows = []
    for seed in spec.seeds:
        train_sets, _, chunks, truth = benchmark_data(spec, seed)
        train_seed = _child_seeds(seed, 2)[1]
        base = TrainConfig(k=spec.k, seed=train_seed, em=spec.em)
        acc, frac, secs = _evaluate(train_sets, chunks, truth, base)
        rows.append(BenchmarkRow("conventional", "none", 1.0, seed, acc, frac, secs))
        logger.info("seed %d conventional accuracy %.4f", seed, acc)
        for metric in spec.metrics:
            for tau in spec.tau_grid:
                cfg = TrainConfig(k=spec.k, seed=train_seed, em=spec.em, policy=TrimPolicy(metric, tau))
                acc, frac, secs = _evaluate(train_sets, chunks, truth, cfg)
                rows.append(BenchmarkRow("are-trim", metric.value, tau, seed, acc, frac, secs))
                logger.info("seed %d are-trim %s tau=%.2f accuracy %.4f retained %.4f",
                            seed, metric.value, tau, acc, frac)
    return rows


def summarize(rows: Sequence[BenchmarkRow]) -> list[dict]:
    """Average rows over seeds, one entry per (method, metric, tau) cell."""
    cells: dict = {}
    for r in rows:
        cells.setdefault((r.method, r.metric, r.tau), []).append(r)
    out = []
    for (method, metric, tau), rs in cells.items():
        out.append({
            "method": method, "metric": metric, "tau": tau, "n_seeds": len(rs),
            "accuracy": float(np.mean([r.accuracy for r in rs])),
            "mean_retained_fraction": float(np.mean([r.mean_retained_fraction for r in rs])),
        })
    return out


def results_csv(rows: Sequence[BenchmarkRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for r in rows:
        writer.writerow((r.method, r.metric, repr(r.tau), r.seed, repr(r.accuracy),
                         repr(r.mean_retained_fraction), f"{r.mean_train_seconds:.6f}"))
    return buf.getvalue()
