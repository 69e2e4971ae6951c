"""Versioned JSON reports and plot-ready CSV tables for experiment runs."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .experiments import PairwiseOutcome, SweepResult, sign_test_outcomes

SCHEMA_VERSION = 1
CSV_FILES = (
    "outcomes.csv",
    "sweep_accuracy.csv",
    "usage_hist.csv",
    "depth_dist.csv",
    "variety_dist.csv",
    "outcome_bars.csv",
)


def load_schema() -> dict:
    text = resources.files("betaforge").joinpath("schema/report_v1.json").read_text("utf-8")
    return json.loads(text)


def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, NaN/inf to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _outcome_row(o: PairwiseOutcome) -> dict:
    return {
        "pair_id": o.pair_id,
        "m": o.m,
        "accuracy_a": o.accuracy_a,
        "accuracy_b": o.accuracy_b,
        "verdict": o.verdict,
        "split_seed": o.split_seed,
        "forest_seed": o.forest_seed,
        "n_train": o.n_train,
        "n_test": o.n_test,
    }


def _diag_rows(o: PairwiseOutcome) -> list[dict]:
    rows = []
    for arm, d in (("a", o.diagnostics_a), ("b", o.diagnostics_b)):
        rows.append({
            "pair_id": o.pair_id,
            "m": o.m,
            "arm": arm,
            "mean_depth": d["mean_depth"],
            "median_depth": d["median_depth"],
            "variety_sum": d["variety_sum"],
            "variety_mean": d["variety_mean"],
            "avg_cosine_correlation": d["avg_cosine_correlation"],
            "zero_usage_trees": d["zero_usage_trees"],
            "aggregate_usage": d["aggregate_usage"],
            "depths": d["depths"],
        })
    return rows


def build_report(
    config: dict,
    seeds: dict,
    outcomes: Sequence[PairwiseOutcome] = (),
    sweep: SweepResult | None = None,
    extra: dict | None = None,
) -> dict:
    """Assemble the schema-v1 report document.

    For sweeps the top-level sign test is taken at the m with the largest
    gap between mean arm accuracies; each sweep record carries its own.
    """
    sweep_rows = []
    sign = None
    if sweep is not None:
        outcomes = [o for m in sweep.m_values for o in sweep.outcomes[m]]
        gaps = {}
        for rec in sweep.records:
            row = asdict(rec)
            row["sign_test"] = _safe_sign(sweep.outcomes[rec.m])
            sweep_rows.append(row)
            gaps.setdefault(rec.m, {})[rec.arm] = rec.mean_accuracy
        if gaps:
            m_star = max(gaps, key=lambda m: (abs(gaps[m]["b"] - gaps[m]["a"]), -m))
            sign = _safe_sign(sweep.outcomes[m_star])
            if sign is not None:
                sign["m"] = m_star
    elif outcomes:
        sign = _safe_sign(outcomes)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "config": config,
        "seeds": seeds,
        "outcomes": [_outcome_row(o) for o in outcomes],
        "sign_test": sign,
        "sweep": sweep_rows,
        "diagnostics": [r for o in outcomes for r in _diag_rows(o)],
    }
    if extra:
        doc["extra"] = extra
    return _clean(doc)


def _safe_sign(outcomes) -> dict | None:
    try:
        return sign_test_outcomes(outcomes).to_dict()
    except ValueError:
        return None


def dumps(doc: dict) -> str:
    return json.dumps(_clean(doc), sort_keys=True, indent=2) + "\n"


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None else v for v in r])


def write_csv_tables(report: dict, directory) -> list[Path]:
    """Plot-ready tables: accuracy vs m, usage, depth, variety, outcome bars."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    p = out / "outcomes.csv"
    cols = ["pair_id", "m", "accuracy_a", "accuracy_b", "verdict", "split_seed",
            "forest_seed", "n_train", "n_test"]
    _write_csv(p, cols, ([o[c] for c in cols] for o in report["outcomes"]))
    written.append(p)

    p = out / "sweep_accuracy.csv"
    cols = ["m", "arm", "mean_accuracy", "mean_depth", "mean_variety", "mean_correlation", "n_pairs"]
    _write_csv(p, cols, ([r[c] for c in cols] for r in report["sweep"]))
    written.append(p)

    usage: dict[tuple[int, str], list] = {}
    for d in report["diagnostics"]:
        usage.setdefault((d["m"], d["arm"]), []).append(d["aggregate_usage"])
    p = out / "usage_hist.csv"
    rows = []
    for (m, arm), vecs in sorted(usage.items()):
        width = max(len(v) for v in vecs)
        mean = np.zeros(width)
        for v in vecs:
            mean[: len(v)] += v
        mean /= len(vecs)
        rows.extend((m, arm, j, float(mean[j])) for j in range(width))
    _write_csv(p, ["m", "arm", "feature_index", "mean_usage"], rows)
    written.append(p)

    p = out / "depth_dist.csv"
    cols = ["pair_id", "m", "arm", "mean_depth", "median_depth"]
    _write_csv(p, cols, ([d[c] for c in cols] for d in report["diagnostics"]))
    written.append(p)

    p = out / "variety_dist.csv"
    cols = ["pair_id", "m", "arm", "variety_sum", "variety_mean", "avg_cosine_correlation"]
    _write_csv(p, cols, ([d[c] for c in cols] for d in report["diagnostics"]))
    written.append(p)

    p = out / "outcome_bars.csv"
    bars: dict[tuple[int, str], int] = {}
    for o in report["outcomes"]:
        bars[(o["m"], o["verdict"])] = bars.get((o["m"], o["verdict"]), 0) + 1
    ms = sorted({o["m"] for o in report["outcomes"]})
    _write_csv(p, ["m", "verdict", "count"],
               ((m, v, bars.get((m, v), 0)) for m in ms for v in ("better", "tie", "worse")))
    written.append(p)
    return written


def emit_report(report: dict, fmt: str, path) -> Path:
    """Write ``report`` as one JSON file, or as a directory of CSV tables."""
    if not report.get("outcomes") and not report.get("sweep") and not report.get("extra"):
        raise ValueError("report has no results")
    path = Path(path)
    if fmt == "json":
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps(report), encoding="utf-8")
    elif fmt == "csv":
        write_csv_tables(report, path)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path
