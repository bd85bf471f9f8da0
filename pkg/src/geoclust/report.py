"""Selection report serialization and plot-ready curve tables."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import io as gio
from .errors import ValidationError
from .selection import SelectionConfig, SelectionReport
from .ward import Partition

SCHEMA = "geoclust.selection-report/1"
_REQUIRED = (
    "schema", "config", "criterion", "labels", "grid", "totals", "within",
    "q_bar", "best_index", "assignments", "silhouettes",
)


def _safe(name: str) -> str:
    return name.replace(":", "_").replace(",", "_")


def report_to_dict(report: SelectionReport, digest: str | None = None) -> dict:
    return {
        "schema": SCHEMA,
        "manifest_sha256": digest,
        "config": report.config.to_dict(),
        "criterion": report.criterion,
        "labels": list(report.labels),
        "ids": report.ids,
        "grid": [list(a) for a in report.grid],
        "totals": report.totals.tolist(),
        "within": report.within.tolist(),
        "q_bar": report.q_bar.tolist(),
        "best_index": report.best_index.tolist(),
        "baseline_index": None if report.baseline_index is None else report.baseline_index.tolist(),
        "assignments": [p.assignment.tolist() for p in report.partitions],
        "silhouettes": list(report.silhouettes),
        "chosen_k": report.chosen_k,
    }


def report_from_dict(d: dict) -> SelectionReport:
    if not isinstance(d, dict):
        raise ValidationError("report must be a JSON object")
    missing = [k for k in _REQUIRED if k not in d]
    if missing:
        raise ValidationError(f"report schema mismatch: missing keys {missing}")
    if d["schema"] != SCHEMA:
        raise ValidationError(f"unsupported report schema {d['schema']!r}")
    try:
        cfg = dict(d["config"])
        cfg["matrices"] = tuple(cfg.get("matrices", ()))
        config = SelectionConfig(**cfg)
        grid = [tuple(float(x) for x in a) for a in d["grid"]]
        best = np.array(d["best_index"], dtype=np.int64)
        partitions = [
            Partition(a, int(max(a)), grid[best[i]]) for i, a in enumerate(d["assignments"])
        ]
        baseline = d.get("baseline_index")
        report = SelectionReport(
            labels=tuple(d["labels"]),
            grid=grid,
            totals=np.array(d["totals"], dtype=float),
            within=np.array(d["within"], dtype=float),
            q_bar=np.array(d["q_bar"], dtype=float),
            best_index=best,
            partitions=partitions,
            silhouettes=list(d["silhouettes"]),
            config=config,
            criterion=d["criterion"],
            chosen_k=d.get("chosen_k"),
            baseline_index=None if baseline is None else np.array(baseline, dtype=np.int64),
            ids=d.get("ids"),
        )
    except (TypeError, ValueError, KeyError, IndexError) as exc:
        raise ValidationError(f"report schema mismatch: {exc}") from None
    P = len(report.labels)
    if report.within.shape != (config.k_max, len(grid), P) or report.q_bar.shape != (config.k_max, len(grid)):
        raise ValidationError("report schema mismatch: array shapes disagree with config")
    return report


def load_report(path) -> tuple[SelectionReport, str | None]:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    return report_from_dict(d), d.get("manifest_sha256") if isinstance(d, dict) else None


def curve_header(report: SelectionReport) -> list[str]:
    labels = [_safe(lab) for lab in report.labels]
    return (
        ["k"]
        + [f"alpha_{lab}" for lab in labels]
        + [f"W_{lab}" for lab in labels]
        + [f"Q_{lab}" for lab in labels]
        + [f"Qnorm_{lab}" for lab in labels]
        + ["q_bar", "silhouette", "gain"]
    )


def curve_rows(report: SelectionReport, index=None) -> list[list]:
    """One row per k at the weighting picked by ``index`` (default: the report's choice)."""
    index = report.best_index if index is None else index
    q = report.explained()
    qn = report.normalized()
    rows = []
    prev = None
    for k in report.ks:
        g = int(index[k - 1])
        qb = float(report.q_bar[k - 1, g])
        sil = report.silhouettes[k - 1] if g == report.best_index[k - 1] else None
        rows.append(
            [k]
            + list(report.grid[g])
            + report.within[k - 1, g].tolist()
            + q[k - 1, g].tolist()
            + qn[k - 1, g].tolist()
            + [qb, sil, None if prev is None else qb - prev]
        )
        prev = qb
    return rows


def grid_header(report: SelectionReport) -> list[str]:
    labels = [_safe(lab) for lab in report.labels]
    return (
        ["k", "grid_index"]
        + [f"alpha_{lab}" for lab in labels]
        + [f"W_{lab}" for lab in labels]
        + [f"Q_{lab}" for lab in labels]
        + [f"Qnorm_{lab}" for lab in labels]
        + ["q_bar", "best"]
    )


def grid_rows(report: SelectionReport):
    q = report.explained()
    qn = report.normalized()
    for k in report.ks:
        for g, alphas in enumerate(report.grid):
            yield (
                [k, g]
                + list(alphas)
                + report.within[k - 1, g].tolist()
                + q[k - 1, g].tolist()
                + qn[k - 1, g].tolist()
                + [float(report.q_bar[k - 1, g]), int(g == report.best_index[k - 1])]
            )


def curve_tables(report: SelectionReport) -> dict:
    """``{name: (header, rows)}`` for every curve table the report supports."""
    tables = {
        "curves": (curve_header(report), curve_rows(report)),
        "grid": (grid_header(report), list(grid_rows(report))),
    }
    if report.baseline_index is not None:
        tables["baseline_curves"] = (curve_header(report), curve_rows(report, report.baseline_index))
    return tables


def write_curves(report: SelectionReport, outdir, fmt="csv", digest=None) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, (header, rows) in curve_tables(report).items():
        if fmt == "csv":
            path = outdir / f"{name}.csv"
            gio._write_csv(path, header, rows, gio.digest_comment(digest))
        elif fmt == "json":
            path = outdir / f"{name}.json"
            records = [
                {h: (None if isinstance(v, float) and np.isnan(v) else v) for h, v in zip(header, row)}
                for row in rows
            ]
            gio.write_json(path, {"manifest_sha256": digest, "columns": header, "rows": records})
        else:
            raise ValidationError(f"unknown format {fmt!r}")
        written.append(path)
    return written


def summary_table(report: SelectionReport, k: int, index=None) -> str:
    """Human-readable inertia summary at ``k`` (4 decimals)."""
    index = report.best_index if index is None else index
    g = int(index[k - 1])
    q = report.explained()[k - 1, g]
    qn = report.normalized()[k - 1, g]
    lines = [f"k={k}  weighting=({', '.join(f'{a:.2f}' for a in report.grid[g])})  "
             f"q_bar={report.q_bar[k - 1, g]:.4f}",
             f"{'matrix':<16}{'alpha':>8}{'W(P1)':>10}{'W(PK)':>10}{'Q':>10}{'Qnorm':>10}"]
    for p, lab in enumerate(report.labels):
        qn_txt = "-" if np.isnan(qn[p]) else f"{qn[p]:.4f}"
        lines.append(
            f"{lab:<16}{report.grid[g][p]:>8.2f}{report.totals[p]:>10.4f}"
            f"{report.within[k - 1, g, p]:>10.4f}{q[p]:>10.4f}{qn_txt:>10}"
        )
    return "\n".join(lines)
