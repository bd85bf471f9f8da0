"""Dataset model, entity weights and dissimilarity matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateDataError, ValidationError

#: Tolerance used for symmetry checks and for the weights of a convex combination.
TOL = 1e-9


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeSeries:
    """Irregular annual series: integer stamps and the values observed at them."""

    stamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        stamps = np.asarray(self.stamps)
        if stamps.size and not np.all(np.equal(np.mod(stamps, 1), 0)):
            raise ValidationError("time stamps must be integers")
        stamps = _frozen(stamps, dtype=np.int64)
        values = _frozen(self.values)
        if stamps.ndim != 1 or values.shape != stamps.shape:
            raise ValidationError("stamps and values must be 1-d and of equal length")
        if stamps.size == 0:
            raise ValidationError("time series must hold at least one observation")
        if np.any(np.diff(stamps) <= 0):
            raise ValidationError("time stamps must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValidationError("time series values must be finite")
        object.__setattr__(self, "stamps", stamps)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.stamps.size


@dataclass(frozen=True)
class Entity:
    id: str
    lat: float
    lon: float
    features: np.ndarray = field(default_factory=lambda: np.empty(0))
    series: Mapping[str, TimeSeries] = field(default_factory=dict)

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValidationError(f"entity {self.id!r}: latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValidationError(f"entity {self.id!r}: longitude {self.lon} outside [-180, 180]")
        object.__setattr__(self, "features", _frozen(self.features))
        object.__setattr__(self, "series", dict(self.series))


@dataclass(frozen=True)
class WeightVector:
    """Positive entity weights ``w_i``. They are never renormalized."""

    w: np.ndarray

    def __post_init__(self):
        w = _frozen(self.w)
        if w.ndim != 1 or w.size == 0:
            raise ValidationError("weights must be a non-empty 1-d vector")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValidationError("weights must be finite and strictly positive")
        object.__setattr__(self, "w", w)

    @classmethod
    def uniform(cls, n: int) -> "WeightVector":
        return cls(np.full(n, 1.0 / n))

    def __len__(self):
        return self.w.size


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of entities with optional per-entity weights.

    ``meta`` holds pass-through columns (one list of strings per column name)
    that play no role in the clustering.
    """

    entities: tuple
    feature_names: tuple = ()
    weights: WeightVector | None = None
    meta: Mapping[str, tuple] = field(default_factory=dict)

    def __post_init__(self):
        entities = tuple(self.entities)
        ids = [e.id for e in entities]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate entity ids: {dup}")
        object.__setattr__(self, "entities", entities)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if self.weights is not None and len(self.weights) != len(entities):
            raise ValidationError("weight vector length does not match the number of entities")
        object.__setattr__(self, "meta", {k: tuple(v) for k, v in self.meta.items()})

    def __len__(self):
        return len(self.entities)

    @property
    def ids(self) -> list[str]:
        return [e.id for e in self.entities]

    @property
    def coords(self) -> np.ndarray:
        """(n, 2) array of (lat, lon) in degrees."""
        return np.array([[e.lat, e.lon] for e in self.entities], dtype=float).reshape(-1, 2)

    @property
    def variables(self) -> list[str]:
        names = set()
        for e in self.entities:
            names.update(e.series)
        return sorted(names)

    def entity_weights(self) -> WeightVector:
        if self.weights is not None:
            return self.weights
        return WeightVector.uniform(len(self))

    def subset(self, keep: Sequence[int]) -> "Dataset":
        keep = list(keep)
        weights = None if self.weights is None else WeightVector(self.weights.w[keep])
        meta = {k: [v[i] for i in keep] for k, v in self.meta.items()}
        return Dataset(
            [self.entities[i] for i in keep], self.feature_names, weights, meta
        )


@dataclass(frozen=True)
class DissimilarityMatrix:
    """Symmetric, nonnegative, zero-diagonal matrix with a provenance label."""

    d: np.ndarray
    label: str = ""
    normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "d", _frozen(self.d))

    @property
    def n(self) -> int:
        return self.d.shape[0]

    def squared(self) -> np.ndarray:
        return self.d * self.d


def validate_matrix(d, label: str = "") -> DissimilarityMatrix:
    """Check a raw square matrix and wrap it as an un-normalized dissimilarity.

    Entries that are asymmetric within ``TOL`` are symmetrized by averaging.
    """
    d = np.array(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValidationError(f"matrix {label!r} is not square: shape {d.shape}")
    if d.shape[0] < 2:
        raise ValidationError(f"matrix {label!r} needs at least 2 entities")
    if not np.all(np.isfinite(d)):
        raise ValidationError(f"matrix {label!r} has non-finite entries")
    if np.any(d < 0):
        i, j = np.argwhere(d < 0)[0]
        raise ValidationError(f"matrix {label!r} has a negative entry at ({i}, {j})")
    if np.any(np.diag(d) != 0):
        i = int(np.flatnonzero(np.diag(d))[0])
        raise ValidationError(f"matrix {label!r} has a nonzero diagonal entry at ({i}, {i})")
    gap = np.abs(d - d.T)
    if np.any(gap > TOL):
        i, j = np.unravel_index(np.argmax(gap), gap.shape)
        raise ValidationError(
            f"matrix {label!r} is asymmetric at ({i}, {j}): {d[i, j]} vs {d[j, i]}"
        )
    d = (d + d.T) / 2.0
    return DissimilarityMatrix(d, label, normalized=False)


def normalize_max(D: DissimilarityMatrix) -> DissimilarityMatrix:
    """Divide every entry by the largest one so that entries lie in [0, 1]."""
    top = D.d.max()
    if not top > 0:
        raise DegenerateDataError(
            f"matrix {D.label!r} is all zero and cannot be max-normalized"
        )
    return DissimilarityMatrix(D.d / top, D.label, normalized=True)


def combine(matrices: Sequence[DissimilarityMatrix], alphas: Sequence[float]) -> DissimilarityMatrix:
    """Convex combination ``sum_p alphas[p] * matrices[p]`` of normalized matrices."""
    if len(matrices) < 2:
        raise ValidationError("combine needs at least two matrices")
    if len(alphas) != len(matrices):
        raise ValidationError(f"{len(alphas)} weights given for {len(matrices)} matrices")
    alphas = np.asarray(alphas, dtype=float)
    if np.any(alphas < 0) or not np.all(np.isfinite(alphas)):
        raise ValidationError("mixing weights must be finite and nonnegative")
    if abs(alphas.sum() - 1.0) > TOL:
        raise ValidationError(f"mixing weights sum to {alphas.sum()!r}, not 1")
    n = matrices[0].n
    for D in matrices:
        if D.n != n:
            raise ValidationError(f"matrix {D.label!r} has size {D.n}, expected {n}")
        if not D.normalized:
            raise ValidationError(f"matrix {D.label!r} is not normalized")
    out = alphas[0] * matrices[0].d
    for a, D in zip(alphas[1:], matrices[1:]):
        out = out + a * D.d
    label = "combined[" + ";".join(
        f"{D.label}={a:.10g}" for a, D in zip(alphas, matrices)
    ) + "]"
    return DissimilarityMatrix(out, label, normalized=True)


def filter_min_observations(dataset: Dataset, variables: Sequence[str], m: int):
    """Keep entities whose series for every listed variable has at least ``m`` points.

    Returns ``(filtered_dataset, n_removed)``.
    """
    if m < 1:
        raise ValidationError("minimum number of observations must be >= 1")
    for v in variables:
        if not any(v in e.series for e in dataset.entities):
            raise ValidationError(f"variable {v!r} is absent from every entity")
    keep = [
        i
        for i, e in enumerate(dataset.entities)
        if all(v in e.series and len(e.series[v]) >= m for v in variables)
    ]
    return dataset.subset(keep), len(dataset) - len(keep)
