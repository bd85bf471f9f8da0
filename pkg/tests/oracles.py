"""Slow, independent reference computations used as test oracles.

None of these import the code paths they check.
"""

import itertools
import math


def dtw_paths(n, m):
    """Every monotone warping path from (0, 0) to (n-1, m-1) with unit steps."""
    if n == 1 and m == 1:
        yield [(0, 0)]
        return
    for prev in ((n - 2, m - 2), (n - 2, m - 1), (n - 1, m - 2)):
        if prev[0] >= 0 and prev[1] >= 0:
            for path in dtw_paths(prev[0] + 1, prev[1] + 1):
                yield path + [(n - 1, m - 1)]


def dtw_brute(x, y):
    return min(
        sum(abs(x[s] - y[r]) for s, r in path) for path in dtw_paths(len(x), len(y))
    )


def great_circle_chord(lat1, lon1, lat2, lon2, radius=6371.0088):
    """Arc length from the chord between unit vectors (no haversine involved)."""
    def unit(lat, lon):
        la, lo = math.radians(lat), math.radians(lon)
        return (math.cos(la) * math.cos(lo), math.cos(la) * math.sin(lo), math.sin(la))

    a, b = unit(lat1, lon1), unit(lat2, lon2)
    chord = math.dist(a, b)
    return 2 * radius * math.asin(min(1.0, chord / 2))


def cluster_inertia(cluster, d, w):
    """Double sum over ordered pairs, written with plain loops."""
    cluster = list(cluster)
    total_w = sum(w[i] for i in cluster)
    acc = 0.0
    for i in cluster:
        for j in cluster:
            acc += w[i] * w[j] / (2 * total_w) * d[i][j] ** 2
    return acc


def partition_inertia(clusters, d, w):
    return sum(cluster_inertia(c, d, w) for c in clusters)


def ward_brute(d, w, tol=1e-12):
    """Greedy agglomeration by direct evaluation of every candidate merge.

    Clusters are identified by their smallest member; ties within ``tol``
    go to the lexicographically smallest (min-id, max-id). Returns the list
    of partitions from n clusters down to 1 (each a sorted list of sorted
    tuples).
    """
    n = len(d)
    clusters = [(i,) for i in range(n)]
    history = [sorted(clusters)]
    while len(clusters) > 1:
        base = partition_inertia(clusters, d, w)
        cands = []
        for a, b in itertools.combinations(range(len(clusters)), 2):
            merged = tuple(sorted(clusters[a] + clusters[b]))
            rest = [c for k, c in enumerate(clusters) if k not in (a, b)]
            increase = partition_inertia(rest + [merged], d, w) - base
            ids = tuple(sorted((min(clusters[a]), min(clusters[b]))))
            cands.append((increase, ids, a, b))
        lo = min(c[0] for c in cands)
        _, _, a, b = min((c for c in cands if c[0] <= lo + tol), key=lambda c: c[1])
        merged = tuple(sorted(clusters[a] + clusters[b]))
        clusters = [c for k, c in enumerate(clusters) if k not in (a, b)] + [merged]
        history.append(sorted(clusters))
    return history


def simplex_brute(p, steps):
    """Integer compositions of ``steps`` into ``p`` parts via the full product."""
    return [c for c in itertools.product(range(steps + 1), repeat=p) if sum(c) == steps]


def silhouette_brute(d, labels):
    n = len(d)
    scores = []
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            scores.append(0.0)
            continue
        a = sum(d[i][j] for j in own) / len(own)
        b = min(
            sum(d[i][j] for j in range(n) if labels[j] == c) / sum(1 for j in range(n) if labels[j] == c)
            for c in set(labels) if c != labels[i]
        )
        scores.append(0.0 if max(a, b) == 0 else (b - a) / max(a, b))
    return sum(scores) / n
