"""Domain types, seeding, and dataset / model file handling."""

from __future__ import annotations

import json
import math
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)
WEIGHT_SUM_TOL = 1e-12
MODEL_FILE_WEIGHT_TOL = 1e-9
BINARY_MAGIC = b"ATDS"
MAX_SEED = 2**64 - 1


class ParseError(ValueError):
    """Raised when a dataset or model file cannot be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def make_rng(seed: int) -> np.random.Generator:
    """Return a fresh generator for a 64-bit unsigned seed.

    Every randomized operation in the package takes an explicit seed and
    builds its own generator through this function; nothing touches the
    global numpy RNG.
    """
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.default_rng(seed)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """T samples of dimension d, stored as a read-only (T, d) float array."""

    samples: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ValueError(f"dataset must be a non-empty (T, d) array, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("dataset contains NaN or Inf entries")
        object.__setattr__(self, "samples", _frozen(x))

    @property
    def T(self) -> int:
        return self.samples.shape[0]

    @property
    def d(self) -> int:
        return self.samples.shape[1]

    def __len__(self) -> int:
        return self.T

    def subset(self, mask_or_index) -> "Dataset":
        return Dataset(self.samples[mask_or_index])


@dataclass(frozen=True, eq=False)
class DiagGaussian:
    """A normal density with diagonal covariance, parameterised by variances."""

    mean: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        var = np.atleast_1d(np.asarray(self.var, dtype=np.float64))
        if mean.ndim != 1 or mean.shape != var.shape:
            raise ValueError(f"mean and var must be matching vectors, got {mean.shape} and {var.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(var))):
            raise ValueError("non-finite Gaussian parameters")
        if np.any(var <= 0):
            raise ValueError("variances must be strictly positive")
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "var", _frozen(var))

    @property
    def d(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True, eq=False)
class Gmm:
    """Weighted mixture of diagonal Gaussians sharing one dimension."""

    weights: np.ndarray
    components: tuple

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        comps = tuple(self.components)
        if len(comps) < 1 or w.shape != (len(comps),):
            raise ValueError("need one weight per component and at least one component")
        if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights must be nonnegative and sum to 1, got sum {w.sum()!r}")
        dims = {c.d for c in comps}
        if len(dims) != 1:
            raise ValueError(f"components have mixed dimensions {sorted(dims)}")
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_arrays(cls, weights, means, variances) -> "Gmm":
        means = np.atleast_2d(np.asarray(means, dtype=np.float64))
        variances = np.atleast_2d(np.asarray(variances, dtype=np.float64))
        comps = tuple(DiagGaussian(m, v) for m, v in zip(means, variances))
        return cls(weights, comps)

    @property
    def K(self) -> int:
        return len(self.components)

    @property
    def d(self) -> int:
        return self.components[0].d

    @property
    def means(self) -> np.ndarray:
        return np.stack([c.mean for c in self.components])

    @property
    def variances(self) -> np.ndarray:
        return np.stack([c.var for c in self.components])

    def to_dict(self) -> dict:
        return {
            "dim": self.d,
            "num_components": self.K,
            "weights": [float(w) for w in self.weights],
            "components": [
                {"mean": [float(v) for v in c.mean], "var": [float(v) for v in c.var]}
                for c in self.components
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Gmm":
        try:
            dim = int(obj["dim"])
            k = int(obj["num_components"])
            weights = np.asarray(obj["weights"], dtype=np.float64)
            means = [c["mean"] for c in obj["components"]]
            variances = [c["var"] for c in obj["components"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed model file: {exc}") from exc
        if weights.shape != (k,) or len(means) != k:
            raise ParseError(f"num_components={k} disagrees with the weights/components listed")
        if abs(weights.sum() - 1.0) > MODEL_FILE_WEIGHT_TOL:
            raise ParseError(f"weights sum to {weights.sum()!r}, not 1")
        # absorb rounding from text serialisation so the stricter in-memory check holds
        weights = weights / weights.sum()
        try:
            gmm = cls.from_arrays(weights, means, variances)
        except ValueError as exc:
            raise ParseError(str(exc)) from exc
        if gmm.d != dim:
            raise ParseError(f"dim={dim} but components have dimension {gmm.d}")
        return gmm


def log_density(g: DiagGaussian, x) -> float:
    """Log of the diagonal-covariance normal density of `g` at `x`."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != g.mean.shape:
        raise ValueError(f"dimension mismatch: x has shape {x.shape}, Gaussian has d={g.d}")
    z = (x - g.mean) ** 2 / g.var
    return float(-0.5 * (np.sum(z) + np.sum(np.log(g.var)) + g.d * LOG_2PI))


def component_log_densities(model: Gmm, X: np.ndarray) -> np.ndarray:
    """(T, K) matrix of unweighted component log-densities."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.d:
        raise ValueError(f"dimension mismatch: data has shape {X.shape}, model has d={model.d}")
    means = model.means
    var = model.variances
    out = np.empty((X.shape[0], model.K))
    for k in range(model.K):
        z = (X - means[k]) ** 2 / var[k]
        out[:, k] = -0.5 * (z.sum(axis=1) + np.log(var[k]).sum() + model.d * LOG_2PI)
    return out


# ---------------------------------------------------------------------------
# file formats


def atomic_write(path, data: bytes | str) -> None:
    """Write to a temporary sibling file and rename it over `path`."""
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": "\n"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _infer_format(path) -> str:
    return "binary" if Path(path).suffix.lower() in (".bin", ".atds") else "csv"


def load_dataset(path, format: str | None = None) -> Dataset:
    """Read a dataset in CSV (one sample per line, no header) or ATDS binary form."""
    format = format or _infer_format(path)
    if format == "binary":
        return _load_binary(path)
    if format != "csv":
        raise ValueError(f"unknown dataset format {format!r}")
    rows: list[list[float]] = []
    d = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(tok) for tok in line.split(",")]
            except ValueError as exc:
                raise ParseError(f"non-numeric field ({exc})", line=lineno) from None
            if d is None:
                d = len(row)
            elif len(row) != d:
                raise ParseError(f"expected {d} fields, found {len(row)}", line=lineno)
            if not all(math.isfinite(v) for v in row):
                raise ParseError("non-finite value", line=lineno)
            rows.append(row)
    if not rows:
        raise ParseError(f"{path}: empty dataset file")
    return Dataset(np.array(rows))


def _load_binary(path) -> Dataset:
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != BINARY_MAGIC:
        raise ParseError(f"{path}: missing ATDS header")
    T, d = struct.unpack("<II", raw[4:12])
    if T == 0 or d == 0:
        raise ParseError(f"{path}: empty dataset file")
    expected = 12 + 8 * T * d
    if len(raw) != expected:
        raise ParseError(f"{path}: expected {expected} bytes for T={T}, d={d}, found {len(raw)}")
    x = np.frombuffer(raw, dtype="<f8", offset=12).reshape(T, d)
    return Dataset(x)


def dataset_bytes(data: Dataset, format: str) -> bytes | str:
    if format == "binary":
        header = BINARY_MAGIC + struct.pack("<II", data.T, data.d)
        return header + np.ascontiguousarray(data.samples, dtype="<f8").tobytes()
    if format != "csv":
        raise ValueError(f"unknown dataset format {format!r}")
    # repr round-trips doubles exactly
    return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in data.samples)


def save_dataset(data: Dataset, path, format: str | None = None) -> None:
    atomic_write(path, dataset_bytes(data, format or _infer_format(path)))


def save_mask(mask: Sequence[bool], path) -> None:
    atomic_write(path, "".join(f"{int(bool(m))}\n" for m in mask))


def load_mask(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        vals = [line.strip() for line in fh if line.strip()]
    bad = [v for v in vals if v not in ("0", "1")]
    if bad:
        raise ParseError(f"{path}: mask entries must be 0 or 1, found {bad[0]!r}")
    return np.array([v == "1" for v in vals], dtype=bool)


def gmm_to_json(model: Gmm) -> str:
    return json.dumps(model.to_dict(), indent=2) + "\n"


def save_gmm(model: Gmm, path) -> None:
    atomic_write(path, gmm_to_json(model))


def load_gmm(path) -> Gmm:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", line=exc.lineno) from None
    return Gmm.from_dict(obj)
