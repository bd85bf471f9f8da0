"""Spatial and spatiotemporal Ward clustering on mixed dissimilarity matrices.

The mixing weights of the matrices and the number of clusters are chosen by
maximizing the total-inertia-weighted average of the per-matrix explained
pseudo-inertia over a regular grid of weightings.
"""

__version__ = "0.1.0"

from .data import (
    Dataset,
    DissimilarityMatrix,
    Entity,
    TimeSeries,
    WeightVector,
    combine,
    filter_min_observations,
    normalize_max,
    validate_matrix,
)
from .distances import dtw, dtw_matrix, feature_distance, geodetic_distance
from .errors import DegenerateDataError, GeoclustError, ValidationError
from .inertia import (
    MetricsRecord,
    explained_q,
    gain_curve,
    normalized_q,
    pseudo_inertia,
    q_bar,
    silhouette,
    within_inertia,
)
from .selection import (
    SelectionConfig,
    SelectionReport,
    choose_k,
    select_chavent_baseline,
    select_spatial,
    select_spatiotemporal,
    simplex_grid,
)
from .ward import MergeTree, Partition, cut, ward_tree
