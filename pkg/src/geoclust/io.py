"""CSV / JSON / GeoJSON readers and writers.

Machine artifacts write floats with ``repr`` (shortest round-trip form). CSV
artifacts may start with ``#`` comment lines carrying the run's manifest
digest; every reader here skips them.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data import Dataset, DissimilarityMatrix, Entity, TimeSeries, WeightVector, validate_matrix
from .errors import ValidationError

RESERVED = ("id", "lat", "lon", "weight")


def fmt(x) -> str:
    """Format a cell: shortest round-trip float, empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return ""
        return repr(x)
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _rows(path):
    """Yield (line_number, row) pairs, skipping ``#`` comments and blank lines."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [(i, line) for i, line in enumerate(fh, start=1)
                 if line.strip() and not line.startswith("#")]
    reader = csv.reader(line for _, line in lines)
    for (lineno, _), row in zip(lines, reader):
        yield lineno, [c.strip() for c in row]


def read_csv_dicts(path) -> tuple[list[str], list[tuple[int, dict]]]:
    rows = _rows(path)
    try:
        _, header = next(rows)
    except StopIteration:
        raise ValidationError(f"{path}: empty file, a header row is required") from None
    out = []
    for lineno, row in rows:
        if len(row) != len(header):
            raise ValidationError(
                f"{path}, line {lineno}: {len(row)} fields, header has {len(header)}"
            )
        out.append((lineno, dict(zip(header, row))))
    return header, out


def _number(path, lineno, column, text) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ValidationError(
            f"{path}, line {lineno}, column {column!r}: {text!r} is not a number"
        ) from None
    if not math.isfinite(value):
        raise ValidationError(f"{path}, line {lineno}, column {column!r}: non-finite value")
    return value


def read_entities(path, features: Sequence[str] | None = None, meta: Sequence[str] = ()) -> Dataset:
    """Read the entity table: ``id, lat, lon``, feature columns, optional ``weight``.

    Without an explicit ``features`` list every column that is neither
    reserved nor listed in ``meta`` is a feature.
    """
    header, rows = read_csv_dicts(path)
    for col in ("id", "lat", "lon"):
        if col not in header:
            raise ValidationError(f"{path}: missing required column {col!r}")
    for col in meta:
        if col not in header:
            raise ValidationError(f"{path}: missing metadata column {col!r}")
    if features is None:
        features = [c for c in header if c not in RESERVED and c not in meta]
    else:
        missing = [c for c in features if c not in header]
        if missing:
            raise ValidationError(f"{path}: missing feature columns {missing}")
    if not rows:
        raise ValidationError(f"{path}: no entities")

    entities, weights = [], []
    for lineno, row in rows:
        if not row["id"]:
            raise ValidationError(f"{path}, line {lineno}: empty id")
        lat = _number(path, lineno, "lat", row["lat"])
        lon = _number(path, lineno, "lon", row["lon"])
        x = [_number(path, lineno, c, row[c]) for c in features]
        try:
            entities.append(Entity(row["id"], lat, lon, np.array(x)))
        except ValidationError as exc:
            raise ValidationError(f"{path}, line {lineno}: {exc}") from None
        if "weight" in header:
            wt = _number(path, lineno, "weight", row["weight"])
            if wt <= 0:
                raise ValidationError(f"{path}, line {lineno}, column 'weight': must be positive")
            weights.append(wt)
    meta_cols = {c: [row[c] for _, row in rows] for c in meta}
    w = WeightVector(np.array(weights)) if weights else None
    return Dataset(entities, tuple(features), w, meta_cols)


def read_panel(path) -> dict:
    """Long-format panel ``id, variable, year, value`` -> ``{id: {variable: TimeSeries}}``."""
    header, rows = read_csv_dicts(path)
    for col in ("id", "variable", "year", "value"):
        if col not in header:
            raise ValidationError(f"{path}: missing required column {col!r}")
    acc: dict = {}
    for lineno, row in rows:
        year = _number(path, lineno, "year", row["year"])
        if year != int(year):
            raise ValidationError(f"{path}, line {lineno}, column 'year': {row['year']!r} is not an integer")
        value = _number(path, lineno, "value", row["value"])
        cell = acc.setdefault(row["id"], {}).setdefault(row["variable"], {})
        if int(year) in cell:
            raise ValidationError(
                f"{path}, line {lineno}: duplicate observation for "
                f"({row['id']!r}, {row['variable']!r}, {int(year)})"
            )
        cell[int(year)] = value
    return {
        eid: {
            var: TimeSeries(sorted(obs), [obs[y] for y in sorted(obs)])
            for var, obs in per.items()
        }
        for eid, per in acc.items()
    }


def attach_panel(dataset: Dataset, panel: dict) -> Dataset:
    known = set(dataset.ids)
    unknown = sorted(set(panel) - known)
    if unknown:
        raise ValidationError(f"panel references ids absent from the entity table: {unknown[:5]}")
    entities = [
        Entity(e.id, e.lat, e.lon, e.features, panel.get(e.id, {}))
        for e in dataset.entities
    ]
    return Dataset(entities, dataset.feature_names, dataset.weights, dataset.meta)


def _write_csv(path, header, rows, comments: Iterable[str] = ()):
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(x) for x in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def digest_comment(digest: str | None) -> list[str]:
    return [f"manifest_sha256={digest}"] if digest else []


def write_matrix_csv(path, ids: Sequence[str], D: DissimilarityMatrix, digest=None):
    rows = ([i] + list(row) for i, row in zip(ids, D.d))
    comments = digest_comment(digest) + [f"label={D.label}", f"normalized={str(D.normalized).lower()}"]
    _write_csv(path, ["id", *ids], rows, comments)


def read_matrix_csv(path, label: str | None = None) -> tuple[list[str], DissimilarityMatrix]:
    """Read a dense matrix with a header row of ids (first column holds row ids)."""
    rows = list(_rows(path))
    if not rows:
        raise ValidationError(f"{path}: empty matrix file")
    header = rows[0][1]
    ids = header[1:] if header and header[0] in ("id", "") else header
    body = rows[1:]
    values = []
    for k, (lineno, row) in enumerate(body):
        if len(row) == len(ids) + 1:
            if k >= len(ids) or row[0] != ids[k]:
                raise ValidationError(f"{path}, line {lineno}: row id {row[0]!r} does not match header order")
            row = row[1:]
        if len(row) != len(ids):
            raise ValidationError(f"{path}, line {lineno}: expected {len(ids)} values, got {len(row)}")
        values.append([_number(path, lineno, ids[j], t) for j, t in enumerate(row)])
    if len(values) != len(ids):
        raise ValidationError(f"{path}: {len(values)} rows for {len(ids)} ids")
    return list(ids), validate_matrix(np.array(values), label or Path(path).stem)


def write_assignments(path, ids, partition, meta=None, digest=None):
    meta = meta or {}
    header = ["id", "cluster", *meta]
    rows = ([i, int(c), *(meta[m][r] for m in meta)]
            for r, (i, c) in enumerate(zip(ids, partition.assignment)))
    _write_csv(path, header, rows, digest_comment(digest))


def write_assignments_by_k(path, ids, partitions, digest=None):
    header = ["id", *(f"k{p.k}" for p in partitions)]
    rows = ([i, *(int(p.assignment[r]) for p in partitions)] for r, i in enumerate(ids))
    _write_csv(path, header, rows, digest_comment(digest))


def read_assignments(path) -> dict:
    _, rows = read_csv_dicts(path)
    return {row["id"]: int(row["cluster"]) for _, row in rows}


def write_tree_csv(path, tree, digest=None):
    rows = zip(tree.left, tree.right, tree.height, tree.weight)
    _write_csv(path, ["left", "right", "height", "weight"], rows, digest_comment(digest))


def geojson_points(dataset: Dataset, partition, digest=None) -> dict:
    features = []
    for e, c in zip(dataset.entities, partition.assignment):
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [float(e.lon), float(e.lat)]},
            "properties": {"id": e.id, "cluster": int(c)},
        })
    out = {"type": "FeatureCollection", "features": features}
    if digest:
        out["manifest_sha256"] = digest
    return out


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=False) + "\n", encoding="utf-8")


def centroid_series(dataset: Dataset, partition, variables: Sequence[str]) -> list[tuple]:
    """Per-cluster, per-variable, per-year mean and quartiles of the observed values."""
    out = []
    for c in range(1, partition.k + 1):
        members = [e for e, a in zip(dataset.entities, partition.assignment) if a == c]
        for var in variables:
            by_year: dict = {}
            for e in members:
                s = e.series.get(var)
                if s is None:
                    continue
                for y, v in zip(s.stamps, s.values):
                    by_year.setdefault(int(y), []).append(v)
            for y in sorted(by_year):
                v = np.array(by_year[y])
                q25, q75 = np.percentile(v, [25, 75])
                out.append((c, var, y, v.size, float(v.mean()), float(q25), float(q75)))
    return out


def write_centroids(path, rows, digest=None):
    header = ["cluster", "variable", "year", "n", "mean", "q25", "q75"]
    _write_csv(path, header, rows, digest_comment(digest))


def write_entities(path, dataset: Dataset):
    has_w = dataset.weights is not None
    header = ["id", "lat", "lon", *dataset.feature_names] + (["weight"] if has_w else []) + list(dataset.meta)
    rows = []
    for r, e in enumerate(dataset.entities):
        row = [e.id, float(e.lat), float(e.lon), *map(float, e.features)]
        if has_w:
            row.append(float(dataset.weights.w[r]))
        row.extend(dataset.meta[m][r] for m in dataset.meta)
        rows.append(row)
    _write_csv(path, header, rows)


def write_panel(path, dataset: Dataset):
    rows = []
    for e in dataset.entities:
        for var in sorted(e.series):
            s = e.series[var]
            rows.extend([e.id, var, int(y), float(v)] for y, v in zip(s.stamps, s.values))
    _write_csv(path, ["id", "variable", "year", "value"], rows)
