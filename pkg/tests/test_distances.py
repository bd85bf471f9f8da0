import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoclust.data import Dataset, Entity, TimeSeries
from geoclust.distances import (
    EARTH_RADIUS_KM,
    dtw,
    dtw_matrix,
    feature_distance,
    geodetic_distance,
    haversine,
)
from geoclust.errors import DegenerateDataError, ValidationError

from oracles import dtw_brute, great_circle_chord

# chord-based great-circle oracle, frozen
PARIS_LONDON_KM = 343.5565348808836


def _ds(features=None, coords=None):
    n = len(features if features is not None else coords)
    features = features if features is not None else [[0.0]] * n
    coords = coords if coords is not None else [(0.0, 0.0)] * n
    return Dataset([Entity(f"e{i}", *coords[i], features[i]) for i in range(n)])


def test_feature_distance_examples():
    assert feature_distance(_ds([[0, 0], [3, 4]])).d[0, 1] == 5.0
    assert feature_distance(_ds([[1, 2], [1, 2]])).d[0, 1] == 0.0
    np.testing.assert_array_equal(
        feature_distance(_ds([[1], [2], [4]])).d, [[0, 1, 3], [1, 0, 2], [3, 2, 0]]
    )


def test_feature_distance_errors():
    with pytest.raises(ValidationError, match="ragged"):
        feature_distance(_ds([[1, 2], [1]]))


def test_feature_distance_triangle_inequality():
    rng = np.random.default_rng(11)
    d = feature_distance(_ds(rng.normal(size=(25, 4)).tolist())).d
    assert np.all(d[:, None, :] <= d[:, :, None] + d[None, :, :] + 1e-12)


def test_geodetic_examples():
    d = geodetic_distance(_ds(coords=[(10.0, 20.0), (10.0, 20.0)])).d
    assert d[0, 1] == 0.0
    d = geodetic_distance(_ds(coords=[(0.0, 0.0), (0.0, 180.0)])).d
    assert d[0, 1] == pytest.approx(math.pi * 6371.0088, abs=0.01)
    d = geodetic_distance(_ds(coords=[(48.8566, 2.3522), (51.5074, -0.1278)])).d
    assert d[0, 1] == pytest.approx(PARIS_LONDON_KM, abs=0.1)


def test_haversine_matches_chord_oracle():
    rng = np.random.default_rng(5)
    for _ in range(200):
        lat1, lat2 = rng.uniform(-90, 90, 2)
        lon1, lon2 = rng.uniform(-180, 180, 2)
        assert haversine(lat1, lon1, lat2, lon2) == pytest.approx(
            great_circle_chord(lat1, lon1, lat2, lon2), abs=1e-6
        )


def test_geodetic_matrix_properties():
    rng = np.random.default_rng(2)
    coords = list(zip(rng.uniform(-90, 90, 30), rng.uniform(-180, 180, 30)))
    d = geodetic_distance(_ds(coords=coords)).d
    assert np.array_equal(d, d.T)
    assert np.all(np.diag(d) == 0)
    assert d.max() <= math.pi * EARTH_RADIUS_KM


def test_dtw_examples():
    assert dtw([0.0], [3.0]) == 3.0
    assert dtw([1, 2], [1, 2, 2]) == 0.0
    assert dtw([1, 1, 1], [2, 2, 2]) == 3.0
    x = TimeSeries([2013, 2015, 2016], [4.0, 1.0, 7.5])
    assert dtw(x, x) == 0.0


def test_dtw_empty():
    with pytest.raises(ValidationError):
        dtw([], [1.0])


series = st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=6)


@settings(max_examples=150, deadline=None)
@given(series, series)
def test_dtw_oracle_and_symmetry(x, y):
    assert dtw(x, y) == dtw_brute(x, y)
    assert dtw(x, y) == dtw(y, x)
    assert dtw(x, x) == 0.0


def _panel(series_list, variable="esg"):
    ents = []
    for i, (years, vals) in enumerate(series_list):
        ents.append(Entity(f"e{i}", 45.0 + i, 7.0, [0.0], {variable: TimeSeries(years, vals)}))
    return Dataset(ents)


def test_dtw_matrix_examples():
    ds = _panel([([2013, 2014, 2015], [1, 1, 1]), ([2013, 2014, 2015], [2, 2, 2])])
    D = dtw_matrix(ds, "esg")
    assert D.d[0, 1] == 3.0 and D.label == "dtw:esg"

    same = _panel([([2013, 2014], [1.0, 2.0])] * 3)
    assert np.all(dtw_matrix(same, "esg").d == 0)

    years = np.arange(2013, 2024)
    ds = _panel([(years, np.arange(11.0)), (years[:8], np.ones(8)), (years[5:], np.zeros(6))])
    D = dtw_matrix(ds, "esg")
    assert D.d.shape == (3, 3) and np.all(D.d == D.d.T)
    assert D.d[0, 2] == dtw(np.arange(11.0), np.zeros(6))


def test_dtw_matrix_batched_matches_scalar():
    rng = np.random.default_rng(9)
    years = np.arange(2013, 2024)
    rows = []
    for _ in range(12):
        m = int(rng.integers(6, 12))
        rows.append((np.sort(rng.choice(years, m, replace=False)), rng.normal(size=m)))
    D = dtw_matrix(_panel(rows), "esg").d
    for i in range(12):
        for j in range(12):
            assert D[i, j] == dtw(rows[i][1], rows[j][1])


def test_dtw_matrix_no_overlap_names_pair():
    ds = _panel([([2013, 2014], [1.0, 2.0]), ([2016, 2017], [1.0, 2.0])])
    with pytest.raises(DegenerateDataError, match="'e0' and 'e1'"):
        dtw_matrix(ds, "esg")


def test_dtw_matrix_missing_variable():
    ds = _panel([([2013], [1.0]), ([2013], [2.0])])
    with pytest.raises(ValidationError, match="no series"):
        dtw_matrix(ds, "env")
