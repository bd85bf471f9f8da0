"""Synthetic datasets with planted cluster structure."""

from __future__ import annotations

import numpy as np

from .data import Dataset, DissimilarityMatrix, Entity, TimeSeries, normalize_max

# group centres: (lat, lon) and a feature offset per planted group
_CENTRES = [(45.0, 5.0), (55.0, 20.0), (40.0, -3.0), (60.0, 10.0)]


def planted_labels(n: int, groups: int = 2) -> np.ndarray:
    """Labels ``1..groups`` in contiguous blocks of near-equal size."""
    return np.repeat(np.arange(1, groups + 1), [len(b) for b in np.array_split(np.arange(n), groups)])


def planted_matrices(n=60, P=2, within=0.01, between=1.0, seed=0, groups=2):
    """``P`` normalized matrices sharing one planted partition.

    Raw within-group entries are drawn from ``[0, within]`` and between-group
    entries from ``[between, 2 * between]``; each matrix is then max-normalized.
    Returns ``(matrices, labels)``.
    """
    rng = np.random.default_rng(seed)
    labels = planted_labels(n, groups)
    same = labels[:, None] == labels[None, :]
    out = []
    for p in range(P):
        u = rng.uniform(size=(n, n))
        u = np.triu(u, 1)
        u = u + u.T
        raw = np.where(same, within * u, between * (1.0 + u))
        np.fill_diagonal(raw, 0.0)
        out.append(normalize_max(DissimilarityMatrix(raw, f"planted{p}")))
    return out, labels


def noise_matrix(n, seed=0, label="noise") -> DissimilarityMatrix:
    """Uniform random symmetric dissimilarities, normalized."""
    rng = np.random.default_rng(seed)
    u = np.triu(rng.uniform(size=(n, n)), 1)
    return normalize_max(DissimilarityMatrix(u + u.T, label))


def planted_dataset(n=60, groups=2, seed=0, years=range(2013, 2024), min_obs=6,
                    variables=("esg", "env", "ce"), jitter=0.05):
    """Entities with coordinates, features and panels that all separate the groups.

    Each group sits around its own geographic centre and feature level; its
    series fluctuate around a group-specific level. Every entity observes at
    least ``min_obs`` years. Returns ``(dataset, labels)``.
    """
    rng = np.random.default_rng(seed)
    labels = planted_labels(n, groups)
    years = np.array(list(years))
    entities = []
    for i, g in enumerate(labels):
        lat0, lon0 = _CENTRES[(g - 1) % len(_CENTRES)]
        lat = lat0 + jitter * rng.normal()
        lon = lon0 + jitter * rng.normal()
        level = 10.0 * g
        feats = level + jitter * rng.normal(size=2)
        series = {}
        for v, var in enumerate(variables):
            m = int(rng.integers(min_obs, years.size + 1))
            stamps = np.sort(rng.choice(years, size=m, replace=False))
            vals = level * (1 + v) + jitter * rng.normal(size=m)
            series[var] = TimeSeries(stamps, vals)
        entities.append(Entity(f"e{i:03d}", lat, lon, feats, series))
    return Dataset(entities, ("f1", "f2")), labels


def random_dataset(n=200, seed=0, years=range(2013, 2024), min_obs=6,
                   variables=("esg", "env", "ce")):
    """Unstructured dataset over western Europe, for timing and smoke runs."""
    rng = np.random.default_rng(seed)
    years = np.array(list(years))
    entities = []
    for i in range(n):
        series = {}
        for var in variables:
            m = int(rng.integers(min_obs, years.size + 1))
            stamps = np.sort(rng.choice(years, size=m, replace=False))
            series[var] = TimeSeries(stamps, np.cumsum(rng.normal(size=m)) + rng.uniform(0, 10))
        entities.append(Entity(
            f"r{i:04d}", float(rng.uniform(36, 60)), float(rng.uniform(-9, 20)),
            rng.normal(size=3), series,
        ))
    return Dataset(entities, ("f1", "f2", "f3"))
