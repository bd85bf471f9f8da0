"""Grid search of the mixing weights and the number of clusters.

For every weighting on a regular simplex grid the matrices are combined, one
Ward tree is grown on the combination and cut at every ``k <= k_max``. Each
cut is scored by the weighted average explained inertia over the individual
matrices, and the best weighting is kept per ``k``.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import multiprocessing as mp
import numpy as np

from .data import TOL, DissimilarityMatrix, WeightVector, combine
from .errors import DegenerateDataError, ValidationError
from .inertia import (
    Q_BAR_TOL,
    MatrixMetrics,
    MetricsRecord,
    cut_within_inertias,
    silhouette,
    total_inertia,
)
from .ward import Partition, cut, ward_tree

#: Two weightings whose scores differ by less than this are tied; the earlier
#: one in grid order wins.
SCORE_TIE_TOL = 1e-12
DEFAULT_GAIN_THRESHOLD = 0.02


def grid_steps(delta_alpha: float) -> int:
    if not 0 < delta_alpha <= 1:
        raise ValidationError(f"delta_alpha must lie in (0, 1], got {delta_alpha}")
    steps = 1.0 / delta_alpha
    n = round(steps)
    if abs(steps - n) > TOL:
        raise ValidationError(
            f"1/delta_alpha = {steps:.6g} is not an integer; the grid would miss 1"
        )
    return int(n)


def simplex_grid(p: int, delta_alpha: float) -> list[tuple]:
    """All weight vectors of ``p`` nonnegative multiples of ``delta_alpha`` summing to 1.

    Ordered lexicographically from the first-matrix vertex ``(1, 0, ..., 0)``
    to the last-matrix vertex ``(0, ..., 0, 1)``.
    """
    if p < 2:
        raise ValidationError("a weight grid needs at least two matrices")
    steps = grid_steps(delta_alpha)

    def compositions(total, parts):
        if parts == 1:
            yield (total,)
            return
        for first in range(total, -1, -1):
            for rest in compositions(total - first, parts - 1):
                yield (first,) + rest

    return [tuple(c / steps for c in comp) for comp in compositions(steps, p)]


@dataclass(frozen=True)
class SelectionConfig:
    """``k_rule`` is ``"advisory"``, ``"auto"`` or an integer (fixed k)."""

    k_max: int = 20
    delta_alpha: float = 0.1
    mode: str = "spatial"
    matrices: tuple = ()
    k_rule: str | int = "advisory"
    gain_threshold: float = DEFAULT_GAIN_THRESHOLD

    def __post_init__(self):
        if int(self.k_max) != self.k_max or self.k_max < 2:
            raise ValidationError(f"k_max must be an integer >= 2, got {self.k_max}")
        grid_steps(self.delta_alpha)
        if self.mode not in ("spatial", "spatiotemporal"):
            raise ValidationError(f"unknown mode {self.mode!r}")
        rule = self.k_rule
        if isinstance(rule, str) and rule.isdigit():
            rule = int(rule)
        if not (rule in ("advisory", "auto") or (isinstance(rule, int) and rule >= 1)):
            raise ValidationError(f"k_rule must be 'advisory', 'auto' or a positive integer, got {rule!r}")
        if isinstance(rule, int) and rule > self.k_max:
            raise ValidationError(f"fixed k={rule} exceeds k_max={self.k_max}")
        object.__setattr__(self, "k_rule", rule)
        object.__setattr__(self, "matrices", tuple(self.matrices))

    def to_dict(self) -> dict:
        return {
            "k_max": int(self.k_max),
            "delta_alpha": float(self.delta_alpha),
            "mode": self.mode,
            "matrices": list(self.matrices),
            "k_rule": self.k_rule,
            "gain_threshold": float(self.gain_threshold),
        }


@dataclass
class SelectionReport:
    """Outcome of a grid search.

    ``within[k-1, g, p]`` is the within-inertia of the ``k``-cut of the tree
    grown at weighting ``grid[g]``, measured on matrix ``p``. ``best_index[k-1]``
    is the grid index selected for ``k`` by ``criterion``.
    """

    labels: tuple
    grid: list
    totals: np.ndarray
    within: np.ndarray
    q_bar: np.ndarray
    best_index: np.ndarray
    partitions: list
    silhouettes: list
    config: SelectionConfig
    criterion: str = "q_bar"
    chosen_k: int | None = None
    baseline_index: np.ndarray | None = None
    ids: list | None = None
    extra: dict = field(default_factory=dict)

    @property
    def k_max(self) -> int:
        return self.within.shape[0]

    @property
    def ks(self) -> list[int]:
        return list(range(1, self.k_max + 1))

    def vertex_index(self, p: int) -> int:
        target = tuple(1.0 if i == p else 0.0 for i in range(len(self.labels)))
        return self.grid.index(target)

    def explained(self) -> np.ndarray:
        """Per-matrix explained proportions, shape (k_max, G, P)."""
        return 1.0 - self.within / self.totals

    def baseline_q(self) -> np.ndarray:
        """Explained proportion of each matrix under its own vertex partition, (k_max, P)."""
        q = self.explained()
        return np.stack(
            [q[:, self.vertex_index(p), p] for p in range(len(self.labels))], axis=1
        )

    def normalized(self) -> np.ndarray:
        """Normalized explained proportions (k_max, G, P); NaN where the baseline is zero."""
        base = self.baseline_q()[:, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(base != 0, self.explained() / np.where(base != 0, base, 1.0), np.nan)

    def record(self, k: int, g: int) -> MetricsRecord:
        q = self.explained()[k - 1, g]
        qn = self.normalized()[k - 1, g]
        per = tuple(
            MatrixMetrics(
                label,
                float(self.totals[p]),
                float(self.within[k - 1, g, p]),
                float(q[p]),
                None if np.isnan(qn[p]) else float(qn[p]),
            )
            for p, label in enumerate(self.labels)
        )
        sil = None
        if g == self.best_index[k - 1]:
            sil = self.silhouettes[k - 1]
        return MetricsRecord(k, self.grid[g], per, float(self.q_bar[k - 1, g]), sil)

    def records(self, k: int) -> list[MetricsRecord]:
        return [self.record(k, g) for g in range(len(self.grid))]

    def best_weighting(self, k: int) -> tuple:
        return self.grid[int(self.best_index[k - 1])]

    def best_record(self, k: int) -> MetricsRecord:
        return self.record(k, int(self.best_index[k - 1]))

    def best_records(self) -> list[MetricsRecord]:
        return [self.best_record(k) for k in self.ks]

    def gain_curve(self) -> list[tuple[int, float]]:
        best = [self.q_bar[k - 1, self.best_index[k - 1]] for k in self.ks]
        return [(k, float(best[k - 1] - best[k - 2])) for k in self.ks[1:]]

    def silhouette_curve(self) -> list[tuple[int, float]]:
        return [(k, s) for k, s in zip(self.ks, self.silhouettes) if s is not None]


# -- grid evaluation ---------------------------------------------------------

_STATE: dict = {}


def _init_worker(matrices, w, k_max):
    _STATE["matrices"] = matrices
    _STATE["w"] = w
    _STATE["k_max"] = k_max
    _STATE["squared"] = np.stack([D.squared() for D in matrices])


def _evaluate_chunk(weightings):
    matrices, w, k_max = _STATE["matrices"], _STATE["w"], _STATE["k_max"]
    squared = _STATE["squared"]
    out = np.empty((len(weightings), k_max, len(matrices)))
    for i, alphas in enumerate(weightings):
        tree = ward_tree(combine(matrices, alphas), w)
        out[i] = cut_within_inertias(tree, squared, w, k_max)
    return out


def _chunks(seq, n_chunks):
    size = max(1, -(-len(seq) // n_chunks))
    return [seq[i : i + size] for i in range(0, len(seq), size)]


def evaluate_grid(matrices, w, grid, k_max, n_jobs=1) -> np.ndarray:
    """Within-inertias (k_max, G, P) for every weighting of ``grid``.

    The first row (``k = 1``) is filled with the totals.
    """
    if n_jobs <= 1 or len(grid) < 2:
        _init_worker(matrices, w, k_max)
        parts = [_evaluate_chunk(grid)]
    else:
        ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
        with ProcessPoolExecutor(
            max_workers=n_jobs,
            mp_context=ctx,
            initializer=_init_worker,
            initargs=(matrices, w, k_max),
        ) as pool:
            parts = list(pool.map(_evaluate_chunk, _chunks(grid, 4 * n_jobs)))
    within = np.concatenate(parts, axis=0).transpose(1, 0, 2).copy()
    within[0] = [total_inertia(D, w) for D in matrices]
    return within


def _q_bar_table(within: np.ndarray, totals: np.ndarray) -> np.ndarray:
    denom = totals.sum()
    weighted_q = np.sum((1.0 - within / totals) * totals, axis=-1) / denom
    gain = np.sum(totals - within, axis=-1) / denom
    q_bar = 1.0 - within.sum(axis=-1) / denom
    if __debug__:
        gap = max(np.max(np.abs(weighted_q - q_bar)), np.max(np.abs(gain - q_bar)))
        assert gap <= Q_BAR_TOL, f"q_bar forms disagree by {gap}"
    return q_bar


def _first_best(scores: np.ndarray, maximize=True) -> int:
    """Earliest index whose score is within SCORE_TIE_TOL of the optimum."""
    if maximize:
        return int(np.argmax(scores >= scores.max() - SCORE_TIE_TOL))
    return int(np.argmax(scores <= scores.min() + SCORE_TIE_TOL))


def _check_inputs(matrices, w, config):
    if len(matrices) < 2:
        raise ValidationError("selection needs at least two matrices")
    n = matrices[0].n
    for D in matrices:
        if not isinstance(D, DissimilarityMatrix) or not D.normalized:
            raise ValidationError(f"matrix {getattr(D, 'label', '?')!r} must be max-normalized")
        if D.n != n:
            raise ValidationError(f"matrix {D.label!r} has size {D.n}, expected {n}")
    if config.k_max > n:
        raise ValidationError(f"k_max={config.k_max} exceeds the number of entities n={n}")
    if w is None:
        w = WeightVector.uniform(n)
    if len(w) != n:
        raise ValidationError(f"{len(w)} weights given for {n} entities")
    totals = np.array([total_inertia(D, w) for D in matrices])
    for D, t in zip(matrices, totals):
        if not t > 0:
            raise DegenerateDataError(f"matrix {D.label!r} has zero total inertia")
    return w, totals


def _finish(report: SelectionReport, matrices, w) -> SelectionReport:
    """Attach best partitions, silhouettes and the chosen k."""
    n = matrices[0].n
    trees = {}
    for k in report.ks:
        alphas = report.best_weighting(k)
        if alphas not in trees:
            combined = combine(matrices, alphas)
            trees[alphas] = (combined, ward_tree(combined, w))
        combined, tree = trees[alphas]
        part = cut(tree, k, alphas)
        report.partitions.append(part)
        report.silhouettes.append(silhouette(part, combined) if 2 <= k <= n - 1 else None)
    report.chosen_k = choose_k(report, report.config.k_rule)
    return report


def _select(matrices, w, config, grid, criterion, n_jobs, ids):
    w, totals = _check_inputs(matrices, w, config)
    within = evaluate_grid(matrices, w, grid, config.k_max, n_jobs)
    q_bar = _q_bar_table(within, totals)
    report = SelectionReport(
        labels=tuple(D.label for D in matrices),
        grid=list(grid),
        totals=totals,
        within=within,
        q_bar=q_bar,
        best_index=np.zeros(config.k_max, dtype=np.int64),
        partitions=[],
        silhouettes=[],
        config=config,
        criterion=criterion,
        ids=None if ids is None else list(ids),
    )
    report.best_index = np.array([_first_best(q_bar[k]) for k in range(config.k_max)])
    if criterion == "chavent":
        report.baseline_index = report.best_index.copy()
        report.best_index = chavent_index(report)
    elif len(matrices) == 2:
        report.baseline_index = chavent_index(report, strict=False)
        if report.baseline_index is not None:
            rows = np.arange(config.k_max)
            mine = q_bar[rows, report.best_index]
            theirs = q_bar[rows, report.baseline_index]
            assert np.all(mine >= theirs - SCORE_TIE_TOL), "argmax below the balance criterion"
    return _finish(report, matrices, w)


def chavent_index(report: SelectionReport, strict=True):
    """Per-k grid index minimizing the gap between the two normalized proportions.

    At ``k = 1`` the proportions are undefined and the first weighting is used.
    With ``strict=False`` a degenerate baseline yields ``None`` instead of raising.
    """
    if len(report.labels) != 2:
        raise ValidationError("the balance criterion is defined for two matrices")
    base = report.baseline_q()
    qn = report.normalized()
    out = np.zeros(report.k_max, dtype=np.int64)
    for k in range(2, report.k_max + 1):
        zero = [report.labels[p] for p in range(2) if base[k - 1, p] == 0]
        if zero:
            if not strict:
                return None
            raise DegenerateDataError(
                f"matrix {zero[0]!r} has a zero baseline explained proportion at k={k}"
            )
        gap = np.abs(qn[k - 1, :, 0] - qn[k - 1, :, 1])
        out[k - 1] = _first_best(gap, maximize=False)
    return out


def select_spatial(D0, D1, w=None, config=None, n_jobs=1, ids=None) -> SelectionReport:
    """Choose the feature/spatial mix per k by maximizing ``q_bar``.

    ``D0`` is the feature matrix and ``D1`` the spatial one; the grid runs over
    the spatial weight ``alpha`` with weighting ``(1 - alpha, alpha)``. The
    balance criterion is evaluated on the same grid and kept in
    ``baseline_index`` for comparison.
    """
    config = config or SelectionConfig()
    grid = simplex_grid(2, config.delta_alpha)
    return _select([D0, D1], w, config, grid, "q_bar", n_jobs, ids)


def select_spatiotemporal(matrices, w=None, config=None, n_jobs=1, ids=None) -> SelectionReport:
    config = config or SelectionConfig(delta_alpha=0.05, mode="spatiotemporal")
    grid = simplex_grid(len(matrices), config.delta_alpha)
    return _select(list(matrices), w, config, grid, "q_bar", n_jobs, ids)


def select_chavent_baseline(D0, D1, w=None, config=None, n_jobs=1, ids=None) -> SelectionReport:
    """Same grid as :func:`select_spatial`, but ``alpha`` balances the normalized proportions.

    ``baseline_index`` then holds the ``q_bar`` argmax for comparison.
    """
    config = config or SelectionConfig()
    grid = simplex_grid(2, config.delta_alpha)
    return _select([D0, D1], w, config, grid, "chavent", n_jobs, ids)


# -- choice of k -------------------------------------------------------------

def auto_k(gains: Sequence, silhouettes: Sequence = (), threshold: float = DEFAULT_GAIN_THRESHOLD) -> int:
    """Largest k whose gain reaches ``threshold``.

    ``gains`` holds ``(k, gain)`` pairs. If no gain qualifies, the k with the
    highest silhouette is returned (smaller k on ties), else 1.
    """
    ok = [k for k, g in gains if g >= threshold]
    if ok:
        return max(ok)
    sil = [(s, -k) for k, s in silhouettes if s is not None]
    if sil:
        return -max(sil)[1]
    return 1


def choose_k(report: SelectionReport, rule) -> int | None:
    if len(report.ks) < 2:
        raise ValidationError("choosing k needs at least two cluster counts")
    if isinstance(rule, str) and rule.isdigit():
        rule = int(rule)
    if rule == "advisory":
        return None
    if rule == "auto":
        return auto_k(report.gain_curve(), report.silhouette_curve(), report.config.gain_threshold)
    if isinstance(rule, int):
        if not 1 <= rule <= report.k_max:
            raise ValidationError(f"fixed k={rule} outside 1..{report.k_max}")
        return rule
    raise ValidationError(f"unknown k rule {rule!r}")


def default_jobs() -> int:
    env = os.environ.get("GEOCLUST_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"GEOCLUST_THREADS must be an integer, got {env!r}") from None
    return 1
