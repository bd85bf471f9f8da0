"""Command-line front end: ``geoclust distances|spatial|spatiotemporal|report``.

Exit status: 0 success, 2 input or validation error, 3 degenerate data,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from . import io as gio
from .data import filter_min_observations, normalize_max
from .distances import dtw_matrix, feature_distance, geodetic_distance
from .errors import GeoclustError, ValidationError
from .report import load_report, report_to_dict, summary_table, write_curves
from .selection import (
    SCORE_TIE_TOL,
    SelectionConfig,
    default_jobs,
    select_spatial,
    select_spatiotemporal,
)
from .ward import TIE_BREAK_RULE

TIE_RULES = {
    "ward": TIE_BREAK_RULE,
    "weighting": f"equal q_bar (within {SCORE_TIE_TOL:g}) keeps the earliest weighting in grid order",
}

DEFAULTS = {
    "spatial": {"delta_alpha": 0.1, "k_max": 20},
    "spatiotemporal": {"delta_alpha": 0.05, "k_max": 20},
}


def _csv_list(text):
    return [t.strip() for t in text.split(",") if t.strip()] if text else []


def _load_config(path) -> dict:
    if not path:
        return {}
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config file {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ValidationError(f"config file {path} must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in cfg.items()}


def _resolve(args, cfg, name, default=None):
    """Command-line flag, then config file, then default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    return cfg.get(name, default)


def _list_opt(args, cfg, name):
    value = _resolve(args, cfg, name)
    if value is None:
        return None
    return _csv_list(value) if isinstance(value, str) else list(value)


class Manifest:
    """Run description; its digest excludes the creation timestamp.

    The worker count is deliberately not recorded, so that runs with
    different ``--threads`` write identical files.
    """

    def __init__(self, command, inputs, config):
        self.body = {
            "engine": "geoclust",
            "version": __version__,
            "command": command,
            "inputs": {
                role: {"file": Path(p).name, "sha256": gio.sha256_file(p)}
                for role, p in inputs.items() if p
            },
            "config": config,
            "tie_break": TIE_RULES,
        }

    @property
    def digest(self) -> str:
        blob = json.dumps(self.body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def write(self, path, started):
        epoch = os.environ.get("SOURCE_DATE_EPOCH")
        stamp = datetime.fromtimestamp(int(epoch) if epoch else started, tz=timezone.utc)
        out = dict(self.body)
        out["sha256"] = self.digest
        out["created"] = stamp.isoformat(timespec="seconds")
        gio.write_json(path, out)


def _threads(args, cfg) -> int:
    value = _resolve(args, cfg, "threads")
    if value is None:
        return default_jobs()
    if int(value) < 1:
        raise ValidationError("--threads must be >= 1")
    return int(value)


def _selection_config(args, cfg, mode, labels) -> SelectionConfig:
    if getattr(args, "k", None) is not None:
        rule = args.k
    elif getattr(args, "k_rule", None) is not None:
        rule = args.k_rule
    else:
        rule = cfg.get("k", cfg.get("k_rule", "advisory"))
    return SelectionConfig(
        k_max=int(_resolve(args, cfg, "k_max", DEFAULTS[mode]["k_max"])),
        delta_alpha=float(_resolve(args, cfg, "delta_alpha", DEFAULTS[mode]["delta_alpha"])),
        mode=mode,
        matrices=tuple(labels),
        k_rule=rule,
        gain_threshold=float(_resolve(args, cfg, "gain_threshold", 0.02)),
    )


def _load_dataset(args, cfg, need_panel=False):
    entities = args.entities
    features = _list_opt(args, cfg, "features")
    meta = _list_opt(args, cfg, "meta") or []
    dataset = gio.read_entities(entities, features, meta)
    panel = _resolve(args, cfg, "panel")
    if need_panel and not panel:
        raise ValidationError("a panel CSV is required (--panel)")
    if panel:
        dataset = gio.attach_panel(dataset, gio.read_panel(panel))
    return dataset, panel


def _apply_filter(dataset, variables, min_obs):
    if not min_obs:
        return dataset, 0
    filtered, removed = filter_min_observations(dataset, variables, int(min_obs))
    if len(filtered) < 2:
        raise ValidationError(
            f"minimum-observation filter (m={min_obs}) leaves {len(filtered)} entities"
        )
    return filtered, removed


def _write_outputs(outdir, dataset, report, manifest, started, variables=None):
    digest = manifest.digest
    gio.write_json(outdir / "report.json", report_to_dict(report, digest))
    write_curves(report, outdir, "csv", digest)
    gio.write_assignments_by_k(outdir / "assignments_by_k.csv", dataset.ids, report.partitions, digest)
    k = report.chosen_k
    if k is not None:
        part = report.partitions[k - 1]
        gio.write_assignments(outdir / "assignments.csv", dataset.ids, part, dataset.meta, digest)
        gio.write_json(outdir / "clusters.geojson", gio.geojson_points(dataset, part, digest))
        if variables:
            rows = gio.centroid_series(dataset, part, variables)
            gio.write_centroids(outdir / "centroids.csv", rows, digest)
    manifest.write(outdir / "manifest.json", started)


def cmd_distances(args, cfg):
    started = time.time()
    which = args.which or ["feature", "spatial"]
    variables = _list_opt(args, cfg, "variables") or []
    dataset, panel = _load_dataset(args, cfg, need_panel="dtw" in which)
    if "dtw" in which:
        if not variables:
            variables = dataset.variables
        dataset, removed = _apply_filter(dataset, variables, _resolve(args, cfg, "min_obs"))
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(
        "distances",
        {"entities": args.entities, "panel": panel},
        {"which": which, "variables": variables, "min_obs": _resolve(args, cfg, "min_obs")},
    )
    mats = []
    if "feature" in which:
        mats.append(feature_distance(dataset))
    if "spatial" in which:
        mats.append(geodetic_distance(dataset))
    if "dtw" in which:
        mats.extend(dtw_matrix(dataset, v) for v in variables)
    digest = manifest.digest
    for D in mats:
        stem = D.label.replace(":", "_")
        gio.write_matrix_csv(outdir / f"raw_{stem}.csv", dataset.ids, D, digest)
        gio.write_matrix_csv(outdir / f"{stem}.csv", dataset.ids, normalize_max(D), digest)
    manifest.write(outdir / "manifest.json", started)
    print(f"wrote {2 * len(mats)} matrices for {len(dataset)} entities to {outdir}")


def _precomputed(path, ids, label):
    mids, D = gio.read_matrix_csv(path, label)
    if mids != ids:
        raise ValidationError(f"{path}: ids do not match the entity table order")
    return normalize_max(D)


def cmd_spatial(args, cfg):
    started = time.time()
    dataset, _ = _load_dataset(args, cfg)
    fm = _resolve(args, cfg, "feature_matrix")
    sm = _resolve(args, cfg, "spatial_matrix")
    D0 = _precomputed(fm, dataset.ids, "feature") if fm else normalize_max(feature_distance(dataset))
    D1 = _precomputed(sm, dataset.ids, "spatial") if sm else normalize_max(geodetic_distance(dataset))
    config = _selection_config(args, cfg, "spatial", [D0.label, D1.label])
    manifest = Manifest(
        "spatial",
        {"entities": args.entities, "feature_matrix": fm, "spatial_matrix": sm},
        {**config.to_dict(), "features": list(dataset.feature_names), "meta": list(dataset.meta)},
    )
    jobs = _threads(args, cfg)
    report = select_spatial(D0, D1, dataset.entity_weights(), config, n_jobs=jobs, ids=dataset.ids)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_outputs(outdir, dataset, report, manifest, started)
    _print_summary(report)


def cmd_spatiotemporal(args, cfg):
    started = time.time()
    dataset, panel = _load_dataset(args, cfg, need_panel=True)
    variables = _list_opt(args, cfg, "variables") or dataset.variables
    min_obs = _resolve(args, cfg, "min_obs")
    n_before = len(dataset)
    dataset, removed = _apply_filter(dataset, variables, min_obs)
    mats = [normalize_max(dtw_matrix(dataset, v)) for v in variables]
    mats.append(normalize_max(geodetic_distance(dataset)))
    config = _selection_config(args, cfg, "spatiotemporal", [D.label for D in mats])
    manifest = Manifest(
        "spatiotemporal",
        {"entities": args.entities, "panel": panel},
        {
            **config.to_dict(),
            "variables": variables,
            "filter": {"min_obs": min_obs, "entities_in": n_before, "removed": removed},
            "meta": list(dataset.meta),
        },
    )
    jobs = _threads(args, cfg)
    report = select_spatiotemporal(mats, dataset.entity_weights(), config, n_jobs=jobs, ids=dataset.ids)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_outputs(outdir, dataset, report, manifest, started, variables)
    if removed:
        print(f"minimum-observation filter removed {removed} of {n_before} entities")
    _print_summary(report)


def _print_summary(report):
    k = report.chosen_k
    if k is None:
        print("advisory mode: inspect curves.csv (gain, silhouette) and rerun with --k")
        return
    print(summary_table(report, k))


def cmd_report(args, cfg):
    report, digest = load_report(args.report)
    written = write_curves(report, args.out, args.format, digest)
    print("\n".join(str(p) for p in written))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geoclust",
        description="Spatial and spatiotemporal Ward clustering with inertia-based weight selection.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, panel=False):
        p.add_argument("entities", help="entity CSV: id, lat, lon, features..., optional weight")
        p.add_argument("--features", help="comma-separated feature columns (default: all others)")
        p.add_argument("--meta", help="comma-separated pass-through columns")
        p.add_argument("--config", help="JSON config file; flags take precedence")
        p.add_argument("--out", default="geoclust-out", help="output directory")
        if panel:
            p.add_argument("--panel", help="long-format panel CSV: id, variable, year, value")
            p.add_argument("--variables", help="comma-separated panel variables")
            p.add_argument("--min-obs", type=int, dest="min_obs",
                           help="keep entities with at least this many observations per variable")

    def selection(p):
        p.add_argument("--delta-alpha", type=float, dest="delta_alpha")
        p.add_argument("--k-max", type=int, dest="k_max")
        p.add_argument("--k", type=int, help="fixed number of clusters")
        p.add_argument("--k-rule", dest="k_rule", choices=["advisory", "auto"])
        p.add_argument("--gain-threshold", type=float, dest="gain_threshold")
        p.add_argument("--threads", type=int, help="worker processes (env GEOCLUST_THREADS)")

    p = sub.add_parser("distances", help="write raw and normalized dissimilarity matrices")
    common(p, panel=True)
    p.add_argument("--which", nargs="+", choices=["feature", "spatial", "dtw"])
    p.set_defaults(func=cmd_distances)

    p = sub.add_parser("spatial", help="feature + geodetic clustering with weight selection")
    common(p)
    p.add_argument("--feature-matrix", dest="feature_matrix", help="precomputed feature matrix CSV")
    p.add_argument("--spatial-matrix", dest="spatial_matrix", help="precomputed spatial matrix CSV")
    selection(p)
    p.set_defaults(func=cmd_spatial)

    p = sub.add_parser("spatiotemporal", help="DTW panels + geodetic clustering")
    common(p, panel=True)
    selection(p)
    p.set_defaults(func=cmd_spatiotemporal)

    p = sub.add_parser("report", help="regenerate curve tables from a stored report")
    p.add_argument("report", help="report.json written by spatial/spatiotemporal")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_report, config=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(getattr(args, "config", None))
        args.func(args, cfg)
    except GeoclustError as exc:
        print(f"geoclust: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, UnicodeDecodeError) as exc:
        print(f"geoclust: error: {exc}", file=sys.stderr)
        return 2
    except AssertionError as exc:
        print(f"geoclust: internal invariant violated: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
