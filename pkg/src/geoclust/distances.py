"""Feature, geodetic and dynamic-time-warping dissimilarity matrices."""

from __future__ import annotations

import numpy as np

from .data import Dataset, DissimilarityMatrix, TimeSeries
from .errors import DegenerateDataError, ValidationError

#: Mean Earth radius in kilometres (IUGG).
EARTH_RADIUS_KM = 6371.0088


def feature_distance(dataset: Dataset) -> DissimilarityMatrix:
    """Euclidean distances between the static feature vectors."""
    lengths = {e.features.size for e in dataset.entities}
    if len(lengths) != 1:
        raise ValidationError(f"ragged feature vectors, lengths {sorted(lengths)}")
    if lengths == {0}:
        raise ValidationError("entities carry no features")
    X = np.vstack([e.features for e in dataset.entities])
    if not np.all(np.isfinite(X)):
        row = int(np.argwhere(~np.isfinite(X))[0, 0])
        raise ValidationError(f"non-finite feature value for entity {dataset.ids[row]!r}")
    diff = X[:, None, :] - X[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return DissimilarityMatrix(d, "feature")


def haversine(lat1, lon1, lat2, lon2, radius=EARTH_RADIUS_KM):
    """Great-circle distance in km between points given in degrees (broadcasts)."""
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dphi = phi2 - phi1
    dlmb = np.radians(lon2) - np.radians(lon1)
    h = np.sin(dphi / 2) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlmb / 2) ** 2
    return 2 * radius * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def geodetic_distance(dataset: Dataset) -> DissimilarityMatrix:
    lat, lon = dataset.coords.T
    d = haversine(lat[:, None], lon[:, None], lat[None, :], lon[None, :])
    np.fill_diagonal(d, 0.0)
    d = (d + d.T) / 2
    return DissimilarityMatrix(d, "spatial")


def _dtw_batch(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """DTW for m pairs at once; X is (m, a), Y is (m, b)."""
    cost = np.abs(X[:, :, None] - Y[:, None, :])
    acc = np.empty_like(cost)
    acc[:, 0, :] = np.cumsum(cost[:, 0, :], axis=1)
    acc[:, :, 0] = np.cumsum(cost[:, :, 0], axis=1)
    for s in range(1, X.shape[1]):
        for r in range(1, Y.shape[1]):
            best = np.minimum(acc[:, s - 1, r - 1], acc[:, s - 1, r])
            acc[:, s, r] = cost[:, s, r] + np.minimum(best, acc[:, s, r - 1])
    return acc[:, -1, -1]


def dtw(x, y) -> float:
    """Dynamic time warping distance with point cost ``|x_s - y_r|``.

    Runs over the observed values only; stamps are ignored. The first row and
    column of the cost table accumulate along the edge.
    """
    x = np.asarray(x.values if isinstance(x, TimeSeries) else x, dtype=float)
    y = np.asarray(y.values if isinstance(y, TimeSeries) else y, dtype=float)
    if x.ndim != 1 or y.ndim != 1 or x.size == 0 or y.size == 0:
        raise ValidationError("dtw needs two non-empty 1-d series")
    return float(_dtw_batch(x[None, :], y[None, :])[0])


def dtw_matrix(dataset: Dataset, variable: str) -> DissimilarityMatrix:
    """Pairwise DTW matrix for one panel variable.

    Every pair of entities must share at least one time stamp; otherwise a
    :class:`DegenerateDataError` names the first offending pair.
    """
    series = []
    for e in dataset.entities:
        if variable not in e.series:
            raise ValidationError(f"entity {e.id!r} has no series for {variable!r}")
        series.append(e.series[variable])
    n = len(series)
    ids = dataset.ids
    years = np.unique(np.concatenate([s.stamps for s in series]))
    present = np.zeros((n, years.size))
    for i, s in enumerate(series):
        present[i, np.searchsorted(years, s.stamps)] = 1.0
    shared = present @ present.T
    if np.any(shared == 0):
        i, j = np.argwhere(shared == 0)[0]
        raise DegenerateDataError(
            f"entities {ids[i]!r} and {ids[j]!r} share no time stamp for "
            f"{variable!r}; apply a minimum-observation filter"
        )
    # batch the pairs by (len_i, len_j) so each group is one vectorized table
    groups: dict = {}
    for i in range(n):
        for j in range(i + 1, n):
            groups.setdefault((len(series[i]), len(series[j])), []).append((i, j))
    d = np.zeros((n, n))
    for pairs in groups.values():
        I, J = np.array(pairs).T
        X = np.vstack([series[i].values for i in I])
        Y = np.vstack([series[j].values for j in J])
        vals = _dtw_batch(X, Y)
        d[I, J] = vals
        d[J, I] = vals
    return DissimilarityMatrix(d, f"dtw:{variable}")
