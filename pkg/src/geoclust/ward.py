"""Ward-like agglomeration on an arbitrary dissimilarity matrix.

The merge cost of clusters A and B is the increase of pseudo within-cluster
inertia ``I(A u B) - I(A) - I(B)`` where ``I`` is the weighted double sum of
squared dissimilarities. Costs are maintained with the weighted
Lance-Williams recurrence, which is exact for this quantity whether or not
the dissimilarities are Euclidean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DissimilarityMatrix, WeightVector
from .errors import ValidationError

#: Two candidate merges whose costs differ by less than this are tied.
TIE_TOL = 1e-12

TIE_BREAK_RULE = (
    "equal merge costs (within 1e-12) are resolved by merging the pair with the "
    "lexicographically smallest (min-id, max-id), a cluster's id being its "
    "smallest entity index"
)


@dataclass(frozen=True)
class MergeTree:
    """Agglomeration history in the usual linkage layout.

    Leaves are nodes ``0..n-1``; merge ``m`` creates node ``n + m``. ``height``
    holds the raw inertia increase of each merge (not cumulative and not
    necessarily monotone).
    """

    left: np.ndarray
    right: np.ndarray
    height: np.ndarray
    weight: np.ndarray
    leaf_weights: WeightVector

    @property
    def n(self) -> int:
        return len(self.leaf_weights)

    def as_linkage(self) -> np.ndarray:
        """(n-1, 4) array of (left, right, height, merged weight)."""
        return np.column_stack([self.left, self.right, self.height, self.weight])


@dataclass(frozen=True)
class Partition:
    """Cluster labels ``1..k`` canonicalized by order of first appearance."""

    assignment: np.ndarray
    k: int
    weighting: tuple | None = None

    def __post_init__(self):
        a = np.array(self.assignment, dtype=np.int64)
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)
        if self.weighting is not None:
            object.__setattr__(self, "weighting", tuple(float(x) for x in self.weighting))

    @classmethod
    def from_labels(cls, labels, weighting=None) -> "Partition":
        labels = np.asarray(labels)
        _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
        rank = np.empty(first.size, dtype=np.int64)
        rank[np.argsort(first, kind="stable")] = np.arange(first.size)
        return cls(rank[inverse.ravel()] + 1, int(first.size), weighting)

    @property
    def n(self) -> int:
        return self.assignment.size

    def clusters(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.assignment == c) for c in range(1, self.k + 1)]


def ward_tree(D: DissimilarityMatrix, w: WeightVector | None = None) -> MergeTree:
    d = D.d if isinstance(D, DissimilarityMatrix) else np.asarray(D, dtype=float)
    n = d.shape[0]
    if n < 2:
        raise ValidationError("ward_tree needs at least 2 entities")
    if w is None:
        w = WeightVector.uniform(n)
    if len(w) != n:
        raise ValidationError(f"{len(w)} weights given for {n} entities")

    size = w.w.astype(float).copy()
    cost = np.outer(size, size) / np.add.outer(size, size) * (d * d)
    np.fill_diagonal(cost, np.inf)
    node = np.arange(n)

    left = np.empty(n - 1, dtype=np.int64)
    right = np.empty(n - 1, dtype=np.int64)
    height = np.empty(n - 1)
    weight = np.empty(n - 1)
    flat = cost.ravel()
    for m in range(n - 1):
        lo = flat.min()
        # first hit in row-major order on a symmetric matrix is the
        # lexicographically smallest (a, b) with a < b
        a, b = divmod(int(np.argmax(flat <= lo + TIE_TOL)), n)
        h = cost[a, b]
        wa, wb = size[a], size[b]
        left[m], right[m], height[m], weight[m] = node[a], node[b], h, wa + wb

        with np.errstate(invalid="ignore"):
            row = ((wa + size) * cost[a] + (wb + size) * cost[b] - size * h) / (wa + wb + size)
        cost[a, :] = row
        cost[:, a] = row
        cost[a, a] = np.inf
        cost[b, :] = np.inf
        cost[:, b] = np.inf
        size[a] = wa + wb
        node[a] = n + m

    return MergeTree(left, right, height, weight, w)


def _roots(tree: MergeTree, n_merges: int) -> np.ndarray:
    n = tree.n
    parent = np.arange(2 * n - 1)
    parent[tree.left[:n_merges]] = n + np.arange(n_merges)
    parent[tree.right[:n_merges]] = n + np.arange(n_merges)
    while True:
        nxt = parent[parent]
        if np.array_equal(nxt, parent):
            return parent[:n]
        parent = nxt


def cut(tree: MergeTree, k: int, weighting=None) -> Partition:
    """Partition into ``k`` clusters obtained by undoing the last ``k - 1`` merges."""
    n = tree.n
    if not 1 <= k <= n:
        raise ValidationError(f"cannot cut a tree over {n} entities into {k} clusters")
    return Partition.from_labels(_roots(tree, n - k), weighting)


def cut_nodes(tree: MergeTree, k: int) -> np.ndarray:
    """Node id of the cluster containing each leaf at the ``k``-cluster level."""
    return _roots(tree, tree.n - k)
