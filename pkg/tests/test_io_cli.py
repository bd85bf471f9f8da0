import json

import jsonschema
import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from geoclust import io as gio
from geoclust.cli import _threads, build_parser, main
from geoclust.data import normalize_max
from geoclust.distances import feature_distance
from geoclust.errors import ValidationError
from geoclust.report import load_report
from geoclust.synthetic import planted_dataset

POINT_COLLECTION_SCHEMA = {
    "type": "object",
    "required": ["type", "features"],
    "properties": {
        "type": {"const": "FeatureCollection"},
        "features": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["type", "geometry", "properties"],
                "properties": {
                    "type": {"const": "Feature"},
                    "geometry": {
                        "type": "object",
                        "required": ["type", "coordinates"],
                        "properties": {
                            "type": {"const": "Point"},
                            "coordinates": {
                                "type": "array",
                                "minItems": 2,
                                "maxItems": 3,
                                "items": {"type": "number"},
                            },
                        },
                    },
                    "properties": {
                        "type": "object",
                        "required": ["id", "cluster"],
                        "properties": {"id": {"type": "string"}, "cluster": {"type": "integer"}},
                    },
                },
            },
        },
    },
}


@pytest.fixture
def planted_files(tmp_path):
    ds, labels = planted_dataset(n=40, seed=2)
    gio.write_entities(tmp_path / "entities.csv", ds)
    gio.write_panel(tmp_path / "panel.csv", ds)
    return tmp_path, ds, labels


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


# -- ingestion --------------------------------------------------------------

def test_entity_csv_diagnostics(tmp_path):
    bad = _write(tmp_path / "a.csv", "id,lat,lon,x\nA,1,2,3\nB,1,2,oops\n")
    with pytest.raises(ValidationError, match=r"line 3, column 'x'"):
        gio.read_entities(bad)
    ragged = _write(tmp_path / "b.csv", "id,lat,lon,x\nA,1,2\n")
    with pytest.raises(ValidationError, match="line 2"):
        gio.read_entities(ragged)
    nolat = _write(tmp_path / "c.csv", "id,lon,x\nA,2,3\n")
    with pytest.raises(ValidationError, match="'lat'"):
        gio.read_entities(nolat)
    far = _write(tmp_path / "d.csv", "id,lat,lon,x\nA,95,2,3\n")
    with pytest.raises(ValidationError, match="latitude"):
        gio.read_entities(far)


def test_entity_csv_weights_and_meta(tmp_path):
    path = _write(
        tmp_path / "e.csv",
        "# a comment\nid,lat,lon,x,weight,country\nA,1,2,3,2.0,IT\nB,1,3,4,1.0,FR\n",
    )
    ds = gio.read_entities(path, meta=["country"])
    assert ds.feature_names == ("x",)
    np.testing.assert_array_equal(ds.entity_weights().w, [2.0, 1.0])
    assert list(ds.meta["country"]) == ["IT", "FR"]


def test_panel_diagnostics(tmp_path):
    dup = _write(tmp_path / "p.csv", "id,variable,year,value\nA,esg,2013,1\nA,esg,2013,2\n")
    with pytest.raises(ValidationError, match="duplicate"):
        gio.read_panel(dup)
    frac = _write(tmp_path / "q.csv", "id,variable,year,value\nA,esg,2013.5,1\n")
    with pytest.raises(ValidationError, match="not an integer"):
        gio.read_panel(frac)


def test_matrix_csv_round_trip(tmp_path):
    ds, _ = planted_dataset(n=6, seed=1)
    D = normalize_max(feature_distance(ds))
    gio.write_matrix_csv(tmp_path / "m.csv", ds.ids, D, digest="abc")
    ids, back = gio.read_matrix_csv(tmp_path / "m.csv")
    assert ids == ds.ids
    np.testing.assert_array_equal(back.d, D.d)
    _write(tmp_path / "bad.csv", "id,a,b\na,0,1\nb,2,0\n")
    with pytest.raises(ValidationError, match="asymmetric"):
        gio.read_matrix_csv(tmp_path / "bad.csv")


def test_float_format_round_trips():
    for x in (0.1, 1 / 3, 2.0 ** -40, 123456.789012345, np.float64(0.30000000000000004)):
        assert float(gio.fmt(x)) == x
    assert gio.fmt(float("nan")) == "" and gio.fmt(None) == ""


# -- distances ----------------------------------------------------------------

def test_cli_distances_spatial_three_entities(tmp_path, capsys):
    ent = _write(tmp_path / "e.csv", "id,lat,lon,x\nA,0,0,1\nB,0,1,2\nC,1,0,3\n")
    out = tmp_path / "out"
    assert main(["distances", ent, "--which", "spatial", "--out", str(out)]) == 0
    ids, D = gio.read_matrix_csv(out / "spatial.csv")
    assert ids == ["A", "B", "C"] and D.d.shape == (3, 3) and D.d.max() == 1.0
    _, raw = gio.read_matrix_csv(out / "raw_spatial.csv")
    assert raw.d[0, 1] == pytest.approx(111.19, abs=0.01)


def test_cli_distances_feature_345(tmp_path):
    ent = _write(tmp_path / "e.csv", "id,lat,lon,x,y\nA,0,0,0,0\nB,0,1,3,4\n")
    out = tmp_path / "out"
    assert main(["distances", ent, "--which", "feature", "--out", str(out)]) == 0
    _, raw = gio.read_matrix_csv(out / "raw_feature.csv")
    assert raw.d[0, 1] == 5.0


def test_cli_distances_dtw_without_overlap(tmp_path, capsys):
    ent = _write(tmp_path / "e.csv", "id,lat,lon,x\nA,0,0,1\nB,0,1,2\n")
    pan = _write(
        tmp_path / "p.csv",
        "id,variable,year,value\nA,esg,2013,1\nA,esg,2014,2\nB,esg,2016,1\nB,esg,2017,2\n",
    )
    code = main(["distances", ent, "--panel", pan, "--which", "dtw", "--out", str(tmp_path / "o")])
    assert code == 3
    assert "'A' and 'B'" in capsys.readouterr().err


def test_cli_bad_input_exit_codes(tmp_path, capsys):
    ent = _write(tmp_path / "e.csv", "id,lat,lon,x\nA,0,0,1\nB,0,1,oops\n")
    assert main(["spatial", ent, "--out", str(tmp_path / "o")]) == 2
    assert "line 3" in capsys.readouterr().err
    assert main(["spatial", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "o")]) == 2


# -- spatial ------------------------------------------------------------------

def test_cli_spatial_planted(planted_files):
    tmp, ds, labels = planted_files
    out = tmp / "run"
    code = main(["spatial", str(tmp / "entities.csv"), "--k", "2", "--k-max", "6", "--out", str(out)])
    assert code == 0
    got = gio.read_assignments(out / "assignments.csv")
    assert adjusted_rand_score(labels, [got[i] for i in ds.ids]) == 1.0
    geo = json.loads((out / "clusters.geojson").read_text())
    jsonschema.validate(geo, POINT_COLLECTION_SCHEMA)
    assert [f["properties"]["id"] for f in geo["features"]] == ds.ids
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["delta_alpha"] == 0.1
    for name in ("assignments.csv", "curves.csv", "grid.csv", "assignments_by_k.csv"):
        assert f"manifest_sha256={manifest['sha256']}" in (out / name).read_text()


def test_cli_spatial_defaults_and_grid_validation(planted_files, capsys):
    tmp, ds, _ = planted_files
    out = tmp / "run"
    assert main(["spatial", str(tmp / "entities.csv"), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["delta_alpha"] == 0.1 and manifest["config"]["k_max"] == 20
    assert manifest["config"]["k_rule"] == "advisory"
    assert not (out / "assignments.csv").exists()
    assert main(["spatial", str(tmp / "entities.csv"), "--delta-alpha", "0.3", "--out", str(out)]) == 2
    assert "not an integer" in capsys.readouterr().err


def test_cli_precomputed_matrices(planted_files):
    tmp, ds, _ = planted_files
    assert main(["distances", str(tmp / "entities.csv"), "--out", str(tmp / "m")]) == 0
    a, b = tmp / "a", tmp / "b"
    assert main(["spatial", str(tmp / "entities.csv"), "--k-max", "5", "--out", str(a)]) == 0
    assert main([
        "spatial", str(tmp / "entities.csv"), "--k-max", "5", "--out", str(b),
        "--feature-matrix", str(tmp / "m" / "feature.csv"),
        "--spatial-matrix", str(tmp / "m" / "spatial.csv"),
    ]) == 0
    ra, _ = load_report(a / "report.json")
    rb, _ = load_report(b / "report.json")
    np.testing.assert_array_equal(ra.q_bar, rb.q_bar)


def test_config_file_and_flag_precedence(planted_files):
    tmp, ds, _ = planted_files
    cfg = _write(tmp / "cfg.json", json.dumps({"k-max": 4, "delta_alpha": 0.25, "k": 2}))
    out = tmp / "run"
    assert main(["spatial", str(tmp / "entities.csv"), "--config", cfg, "--k-max", "5", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["k_max"] == 5
    assert manifest["config"]["delta_alpha"] == 0.25
    assert manifest["config"]["k_rule"] == 2


def test_threads_flag_env_and_config(monkeypatch):
    parser = build_parser()
    args = parser.parse_args(["spatial", "e.csv"])
    monkeypatch.setenv("GEOCLUST_THREADS", "2")
    assert _threads(args, {}) == 2
    assert _threads(args, {"threads": 3}) == 3
    args = parser.parse_args(["spatial", "e.csv", "--threads", "1"])
    assert _threads(args, {"threads": 3}) == 1
    args = parser.parse_args(["spatial", "e.csv", "--threads", "0"])
    with pytest.raises(ValidationError):
        _threads(args, {})


# -- spatiotemporal -------------------------------------------------------------

def test_cli_spatiotemporal_planted(planted_files):
    tmp, ds, labels = planted_files
    out = tmp / "st"
    code = main([
        "spatiotemporal", str(tmp / "entities.csv"), "--panel", str(tmp / "panel.csv"),
        "--variables", "esg,env,ce", "--min-obs", "6", "--delta-alpha", "0.25",
        "--k-max", "4", "--k", "2", "--out", str(out),
    ])
    assert code == 0
    got = gio.read_assignments(out / "assignments.csv")
    assert adjusted_rand_score(labels, [got[i] for i in ds.ids]) == 1.0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["filter"] == {"min_obs": 6, "entities_in": 40, "removed": 0}
    assert len(manifest["config"]["matrices"]) == 4
    _, rows = gio.read_csv_dicts(out / "centroids.csv")
    assert {r["variable"] for _, r in rows} == {"esg", "env", "ce"}
    assert all(float(r["q25"]) <= float(r["q75"]) for _, r in rows)


def test_cli_spatiotemporal_filter_removes_everything(planted_files, capsys):
    tmp, _, _ = planted_files
    code = main([
        "spatiotemporal", str(tmp / "entities.csv"), "--panel", str(tmp / "panel.csv"),
        "--min-obs", "12", "--out", str(tmp / "st"),
    ])
    assert code == 2
    assert "leaves 0 entities" in capsys.readouterr().err


# -- report ---------------------------------------------------------------------

def test_cli_report_round_trip_and_parity(planted_files):
    tmp, _, _ = planted_files
    run = tmp / "run"
    assert main(["spatial", str(tmp / "entities.csv"), "--k-max", "5", "--out", str(run)]) == 0
    regen = tmp / "regen"
    assert main(["report", str(run / "report.json"), "--out", str(regen)]) == 0
    for name in ("curves.csv", "grid.csv", "baseline_curves.csv"):
        assert (regen / name).read_bytes() == (run / name).read_bytes()
    js = tmp / "js"
    assert main(["report", str(run / "report.json"), "--format", "json", "--out", str(js)]) == 0
    header, rows = gio.read_csv_dicts(run / "curves.csv")
    doc = json.loads((js / "curves.json").read_text())
    assert doc["columns"] == header
    for (_, row), rec in zip(rows, doc["rows"]):
        for h in header:
            v = rec[h]
            assert (row[h] == "" and v is None) or float(row[h]) == float(v)


def test_cli_report_rejects_truncated_json(planted_files, capsys):
    tmp, _, _ = planted_files
    run = tmp / "run"
    assert main(["spatial", str(tmp / "entities.csv"), "--k-max", "4", "--out", str(run)]) == 0
    text = (run / "report.json").read_text()
    broken = _write(tmp / "broken.json", text[: len(text) // 2])
    assert main(["report", broken, "--out", str(tmp / "x")]) == 2
    wrong = _write(tmp / "wrong.json", json.dumps({"schema": "something-else"}))
    assert main(["report", wrong, "--out", str(tmp / "x")]) == 2


def test_reruns_are_byte_identical(planted_files, monkeypatch):
    tmp, _, _ = planted_files
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    outs = []
    for threads in ("1", "2"):
        out = tmp / f"run{threads}"
        args = ["spatial", str(tmp / "entities.csv"), "--k", "3", "--k-max", "6",
                "--threads", threads, "--out", str(out)]
        assert main(args) == 0
        outs.append(out)
    names = sorted(p.name for p in outs[0].iterdir())
    assert names == sorted(p.name for p in outs[1].iterdir())
    for name in names:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
