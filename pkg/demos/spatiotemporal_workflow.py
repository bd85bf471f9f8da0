"""
Spatiotemporal clustering from yearly panels
============================================

Each synthetic entity has three yearly series observed on at least six of
eleven years. DTW compares series of unequal length; the three DTW matrices and
the geodetic matrix are mixed on a four-component weight simplex.

Run with ``python demos/spatiotemporal_workflow.py``.
"""

# %%
# Filtering and matrices
# ----------------------
import numpy as np

from geoclust import (
    SelectionConfig,
    dtw_matrix,
    filter_min_observations,
    geodetic_distance,
    normalize_max,
    select_spatiotemporal,
)
from geoclust.io import centroid_series
from geoclust.synthetic import planted_dataset

dataset, planted = planted_dataset(n=45, groups=3, seed=11, min_obs=4, jitter=0.5)
variables = ["esg", "env", "ce"]

kept, removed = filter_min_observations(dataset, variables, 6)
print(f"minimum of six observations: kept {len(kept)}, removed {removed}")

matrices = [normalize_max(dtw_matrix(kept, v)) for v in variables]
matrices.append(normalize_max(geodetic_distance(kept)))
print("matrices:", ", ".join(D.label for D in matrices))

# %%
# Selection
# ---------
# A step of 0.05 gives 1771 weightings for four matrices. A coarser step keeps
# this demo quick.
config = SelectionConfig(k_max=6, delta_alpha=0.1, mode="spatiotemporal", k_rule="auto")
report = select_spatiotemporal(matrices, kept.entity_weights(), config, ids=kept.ids)
print(f"{len(report.grid)} weightings evaluated, automatic choice K = {report.chosen_k}")

for k in report.ks[1:]:
    alphas = ", ".join(f"{a:.1f}" for a in report.best_weighting(k))
    print(f"K={k}: q_bar={report.q_bar[k - 1, report.best_index[k - 1]]:.4f}  weights=({alphas})")

# %%
# Cluster profiles
# ----------------
# Mean and quartiles of each variable per cluster and year, the data behind a
# typical ribbon plot.
part = report.partitions[report.chosen_k - 1]
rows = centroid_series(kept, part, ["esg"])
print("\ncluster  year  n  mean    q25     q75")
for cluster, _, year, n, mean, q25, q75 in rows[:8]:
    print(f"{cluster:7d}  {year}  {n:2d}  {mean:6.2f}  {q25:6.2f}  {q75:6.2f}")
print("...")
