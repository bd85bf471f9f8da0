"""Pseudo-inertia and the explained-inertia family of partition metrics.

All inertias use squared dissimilarities: for a cluster ``C``

    I(C) = sum_{i, j in C} w_i w_j d_ij**2 / (2 sum_{i in C} w_i)

and a partition's within-inertia is the sum over its clusters. ``W(P_1)`` is the
inertia of the whole set and serves as the total.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import DissimilarityMatrix, WeightVector
from .errors import DegenerateDataError, ValidationError
from .ward import MergeTree, Partition, cut_nodes

#: Absolute tolerance for the agreement of the three forms of ``q_bar``.
Q_BAR_TOL = 1e-12


@dataclass(frozen=True)
class MatrixMetrics:
    label: str
    w_total: float
    w_within: float
    q: float
    q_normalized: float | None = None


@dataclass(frozen=True)
class MetricsRecord:
    k: int
    weighting: tuple
    per_matrix: tuple = field(default_factory=tuple)
    q_bar: float = 0.0
    silhouette: float | None = None


def _weights(w, n) -> np.ndarray:
    if w is None:
        return np.full(n, 1.0 / n)
    w = w.w if isinstance(w, WeightVector) else np.asarray(w, dtype=float)
    if w.size != n:
        raise ValidationError(f"{w.size} weights given for {n} entities")
    return w


def _squared(D) -> np.ndarray:
    d = D.d if isinstance(D, DissimilarityMatrix) else np.asarray(D, dtype=float)
    return d * d


def pseudo_inertia(cluster, D, w=None) -> float:
    idx = np.asarray(sorted(cluster), dtype=np.int64)
    if idx.size == 0:
        raise ValidationError("pseudo-inertia of an empty cluster is undefined")
    S = _squared(D)
    wi = _weights(w, S.shape[0])[idx]
    return float(wi @ S[np.ix_(idx, idx)] @ wi / (2.0 * wi.sum()))


def _within_sq(labels: np.ndarray, S: np.ndarray, w: np.ndarray) -> float:
    k = int(labels.max())
    Z = np.zeros((labels.size, k))
    Z[np.arange(labels.size), labels - 1] = w
    T = np.einsum("ik,ik->k", Z, S @ Z)
    return float(np.sum(T / (2.0 * Z.sum(axis=0))))


def within_inertia(partition: Partition, D, w=None) -> float:
    """Sum of the pseudo-inertias of the clusters of ``partition``."""
    S = _squared(D)
    if partition.n != S.shape[0]:
        raise ValidationError(f"partition covers {partition.n} entities, matrix has {S.shape[0]}")
    return _within_sq(partition.assignment, S, _weights(w, S.shape[0]))


def mixed_within_inertia(partition: Partition, matrices: Sequence, alphas: Sequence[float], w=None) -> float:
    """Convex combination of the per-matrix within-inertias."""
    return float(sum(a * within_inertia(partition, D, w) for a, D in zip(alphas, matrices)))


def total_inertia(D, w=None) -> float:
    """Inertia of the one-cluster partition (same arithmetic as ``within_inertia``)."""
    S = _squared(D)
    return _within_sq(np.ones(S.shape[0], dtype=np.int64), S, _weights(w, S.shape[0]))


def explained_q(partition: Partition, D, w=None) -> float:
    total = total_inertia(D, w)
    if not total > 0:
        raise DegenerateDataError("total inertia is zero; explained proportion undefined")
    return 1.0 - within_inertia(partition, D, w) / total


def normalized_q(q_mixed: float, q_baseline: float) -> float:
    """Explained proportion relative to the single-matrix baseline partition."""
    if q_baseline == 0:
        raise DegenerateDataError("baseline explained proportion is zero")
    return q_mixed / q_baseline


def q_bar_forms(within: Sequence[float], totals: Sequence[float]) -> tuple[float, float, float]:
    """The three algebraic forms of the weighted average explained inertia.

    Returns ``(weighted_q, gain, within_form)``: the total-weighted mean of the
    per-matrix explained proportions, the summed inertia gain over the summed
    totals, and one minus the summed within over the summed totals.
    """
    within = np.asarray(within, dtype=float)
    totals = np.asarray(totals, dtype=float)
    if np.any(totals <= 0):
        raise DegenerateDataError("every matrix needs a positive total inertia")
    denom = totals.sum()
    q = 1.0 - within / totals
    weighted_q = float(np.sum(q * totals) / denom)
    gain = float(np.sum(totals - within) / denom)
    within_form = float(1.0 - within.sum() / denom)
    return weighted_q, gain, within_form


def q_bar_from(within: Sequence[float], totals: Sequence[float]) -> float:
    a, b, c = q_bar_forms(within, totals)
    if __debug__:
        assert abs(a - c) <= Q_BAR_TOL and abs(b - c) <= Q_BAR_TOL, (a, b, c)
    return c


def q_bar(partition: Partition, matrices: Sequence, w=None) -> float:
    """Weighted average of the explained mixed pseudo-inertia over ``matrices``."""
    n = {m.n if isinstance(m, DissimilarityMatrix) else len(m) for m in matrices}
    if len(n) != 1:
        raise ValidationError("matrices differ in size")
    within = [within_inertia(partition, D, w) for D in matrices]
    totals = [total_inertia(D, w) for D in matrices]
    return q_bar_from(within, totals)


def silhouette(partition: Partition, D) -> float:
    """Mean silhouette width; entities alone in their cluster score 0."""
    d = D.d if isinstance(D, DissimilarityMatrix) else np.asarray(D, dtype=float)
    n, k = partition.n, partition.k
    if not 2 <= k <= n - 1:
        raise ValidationError(f"silhouette needs 2 <= k <= n-1, got k={k}, n={n}")
    labels = partition.assignment - 1
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    sums = d @ onehot
    counts = onehot.sum(axis=0)
    own = counts[labels]
    a = np.where(own > 1, sums[np.arange(n), labels] / np.maximum(own - 1, 1), 0.0)
    means = sums / counts
    means[np.arange(n), labels] = np.inf
    b = means.min(axis=1)
    top = np.maximum(a, b)
    s = np.where((own > 1) & (top > 0), (b - a) / np.where(top > 0, top, 1.0), 0.0)
    return float(s.mean())


def gain_curve(records: Sequence[MetricsRecord]) -> list[tuple[int, float]]:
    """First differences of ``q_bar`` over consecutive cluster counts."""
    if len(records) < 2:
        raise ValidationError("gain curve needs at least two records")
    out = []
    for prev, cur in zip(records, records[1:]):
        if cur.k != prev.k + 1:
            raise ValidationError(f"records are not consecutive in k: {prev.k} then {cur.k}")
        out.append((cur.k, cur.q_bar - prev.q_bar))
    return out


def cut_within_inertias(tree: MergeTree, squared: np.ndarray, w, k_max: int) -> np.ndarray:
    """Within-inertia of every cut ``k = 1..k_max`` under several matrices.

    ``squared`` is a (P, n, n) stack of squared dissimilarities. Returns a
    (k_max, P) array; row ``k - 1`` is the ``k``-cluster cut. Row 0 is left to
    the caller (it is the weighting-independent total).
    """
    n = tree.n
    w = _weights(w, n)
    kk = min(k_max, n)
    base, inv = np.unique(cut_nodes(tree, kk), return_inverse=True)
    Z = np.zeros((n, kk))
    Z[np.arange(n), inv.ravel()] = w
    G = np.matmul(Z.T, np.matmul(squared, Z))  # (P, kk, kk)
    wb = Z.sum(axis=0)

    members = {int(node): np.eye(kk)[c] for c, node in enumerate(base)}
    out = np.zeros((kk, squared.shape[0]))
    for k in range(kk, 1, -1):
        M = np.array(list(members.values()))
        T = np.einsum("ck,pkl,cl->cp", M, G, M)
        out[k - 1] = np.sum(T / (2.0 * (M @ wb))[:, None], axis=0)
        m = n - k
        merged = members.pop(int(tree.left[m])) + members.pop(int(tree.right[m]))
        members[n + m] = merged
    return out
