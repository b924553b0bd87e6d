"""Replication orchestration, persistence and the canned experiment suites.

Layout of a scenario directory::

    config.txt     normalised scenario configuration
    results.csv    one row per replication, written in replication order
    summary.json   aggregate (``schema: 1``), runtimes and a timestamp
    INCOMPLETE     present while running and left behind on abort

Per-replication results depend only on ``(master_seed, rep_id)``, so the CSV
is identical whatever the number of worker processes.
"""
from __future__ import annotations

import csv
import datetime as _dt
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, from_flat, serialize_config
from .diagnostics import dp_laplace_check
from .pipeline import (
    RESULT_FIELDS,
    aggregate,
    run_density_pair,
    run_replication,
    summarize_density_pairs,
)

__all__ = [
    "SCHEMA_VERSION",
    "SUITES",
    "SMOOTHNESS_GRID",
    "run_scenario",
    "run_suite",
    "suite_cells",
    "rate_condition_lhs",
    "emit_plots_data",
]

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
INCOMPLETE = "INCOMPLETE"
SUITES = ("smoothness-grid", "single-robustness", "dp-vs-density", "dp-laplace")
SMOOTHNESS_GRID = (0.25, 0.5, 1.0, 2.0)
ROBUSTNESS_ALPHAS = (0.1, 0.3, 0.5)
PLOT_HEADER = ("cell", "x", "y", "metric", "value")
DENSITY_FIELDS = ("rep_id", "seed", "chi_true", "dp_post_mean", "dp_post_sd", "dp_covered",
                  "density_post_mean", "density_post_sd", "density_covered")

# Constants pinned for each suite, applied beneath user overrides.
SUITE_DEFAULTS = {
    "smoothness-grid": {},
    "single-robustness": {
        "pilot.always_split": True,
        "pilot.alpha_hint": 0.5,
        "truth.seed_a": 12,
        "truth.amp_a": 3.0,
        "truth.amp_b": 6.0,
        "truth.margin": 0.1,
    },
    "dp-vs-density": {
        "n": 500,
        "reps": 100,
        "truth.seed_f": 12,
        "truth.beta": 1.0,
        "truth.amp_f": 2.0,
        "prior.betabar": 1.0,
        "density.gammabar": 20.0,
    },
    "dp-laplace": {},
}


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_json(path: Path, obj) -> None:
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _map(fn, items, jobs: int):
    """Ordered map, in-process when ``jobs == 1``."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        yield from map(fn, items)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield from pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs)))


def _default_jobs(jobs):
    return jobs if jobs else (os.cpu_count() or 1)


def _run_rows(cfg, out_dir, jobs, worker, fields, summarize):
    out = Path(out_dir or cfg.out_path or ".")
    out.mkdir(parents=True, exist_ok=True)
    marker = out / INCOMPLETE
    marker.write_text("running\n", encoding="utf-8")
    (out / "config.txt").write_text(serialize_config(cfg), encoding="utf-8", newline="\n")
    rows, runtimes = [], []
    with open(out / "results.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in _map(partial(worker, cfg), range(cfg.reps), _default_jobs(jobs)):
            writer.writerow([_fmt(row[f]) for f in fields])
            fh.flush()
            rows.append(row)
            runtimes.append(row["runtime_ms"])
    summary = {
        "schema": SCHEMA_VERSION,
        "complete": True,
        "aggregate": summarize(cfg, rows),
        "runtime_ms": {"total": float(sum(runtimes)), "per_rep": runtimes},
        "timestamp": _now(),
    }
    _write_json(out / "summary.json", summary)
    marker.unlink()
    return rows, summary


def run_scenario(cfg: ScenarioConfig, out_dir=None, jobs: int | None = None):
    """Run every replication of ``cfg``; returns ``(rows, summary)``.

    ``summary["aggregate"]`` holds coverage with its binomial standard error,
    the posterior-sd ratio and median KS/W1 distances.
    """
    return _run_rows(cfg, out_dir, jobs, run_replication, RESULT_FIELDS, aggregate)


def run_density_scenario(cfg: ScenarioConfig, out_dir=None, jobs: int | None = None):
    """Paired DP and density-prior pipelines for every replication of ``cfg``."""
    return _run_rows(cfg, out_dir, jobs, run_density_pair, DENSITY_FIELDS, summarize_density_pairs)


def rate_condition_lhs(alpha: float, beta: float, d: int) -> float:
    return alpha / (2 * alpha + d) + beta / (2 * beta + d)


def suite_cells(name: str, overrides: dict | None = None):
    """Expand a suite into ``[(cell_id, coords, ScenarioConfig), ...]``."""
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
    base_flat = {**SUITE_DEFAULTS[name], **(overrides or {})}
    base = from_flat(base_flat)
    cells = []
    if name == "smoothness-grid":
        for a in SMOOTHNESS_GRID:
            for b in SMOOTHNESS_GRID:
                cfg = from_flat({"truth.alpha": a, "truth.beta": b, "prior.betabar": b}, base)
                cells.append((f"alpha={a}_beta={b}", {"x": a, "y": b}, cfg))
    elif name == "single-robustness":
        for a in ROBUSTNESS_ALPHAS:
            for kind in ("series", "propensity"):
                cfg = from_flat({"truth.alpha": a, "prior.kind": kind}, base)
                cells.append((f"alpha={a}_prior={kind}", {"x": a, "y": kind}, cfg))
    elif name == "dp-vs-density":
        for label, gamma in (("uniform", None), ("rough", 0.3)):
            cfg = from_flat({"truth.gamma": gamma}, base)
            cells.append((f"f0={label}", {"x": label, "y": ""}, cfg))
    else:
        cells.append(("laplace", {"x": "", "y": ""}, base))
    return cells


def _laplace_cell(cfg: ScenarioConfig, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    marker = out / INCOMPLETE
    marker.write_text("running\n", encoding="utf-8")
    table = dp_laplace_check(
        lambda n, rng: rng.random(n), lambda z: z, n=2000, t_list=(-1.0, -0.5, 0.5, 1.0),
        mc_reps=100_000, seed=cfg.master_seed, base_mass=cfg.dp.base_mass, variance=1 / 12,
    )
    with open(out / "results.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(table[0]))
        for row in table:
            w.writerow([_fmt(v) for v in row.values()])
    agg = {"max_abs_ratio_error": max(abs(r["ratio"] - 1) for r in table)}
    for r in table:
        agg[f"ratio_t={r['t']}"] = r["ratio"]
    summary = {"schema": SCHEMA_VERSION, "complete": True, "aggregate": agg, "timestamp": _now()}
    _write_json(out / "summary.json", summary)
    marker.unlink()
    return summary


def _cell_extras(name: str, cfg: ScenarioConfig) -> dict:
    if name != "smoothness-grid":
        return {}
    lhs = rate_condition_lhs(cfg.truth.alpha, cfg.truth.beta, cfg.d)
    return {"rate_condition_lhs": lhs, "rate_condition_holds": lhs >= 0.5 - 1e-12, "at_threshold": math.isclose(lhs, 0.5, abs_tol=1e-12)}


def run_suite(name: str, overrides: dict | None = None, out_dir="results", jobs: int | None = None) -> dict:
    """Run every cell of a suite under ``out_dir/<cell_id>``; failing cells are recorded, not raised."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = []
    for cell_id, coords, cfg in suite_cells(name, overrides):
        cell_dir = out / cell_id
        entry = {"cell": cell_id, **coords, **_cell_extras(name, cfg)}
        try:
            if name == "dp-laplace":
                summary = _laplace_cell(cfg, cell_dir)
            elif name == "dp-vs-density":
                summary = run_density_scenario(cfg, cell_dir, jobs)[1]
            else:
                summary = run_scenario(cfg, cell_dir, jobs)[1]
            summary["coords"] = coords
            _write_json(cell_dir / "summary.json", summary)
            entry.update(summary["aggregate"])
            entry["status"] = "ok"
        except Exception as exc:  # one bad cell must not sink the grid
            log.exception("cell %s failed", cell_id)
            entry["status"] = f"error: {exc}"
        table.append(entry)
    if name == "single-robustness":
        by = {(e["x"], e["y"]): e for e in table if e["status"] == "ok"}
        for a in ROBUSTNESS_ALPHAS:
            if (a, "series") in by and (a, "propensity") in by:
                diff = by[(a, "propensity")]["coverage"] - by[(a, "series")]["coverage"]
                by[(a, "propensity")]["coverage_gain_vs_series"] = diff
    _write_suite_table(out / "suite_summary.csv", table)
    _write_json(out / "suite_summary.json", {"schema": SCHEMA_VERSION, "suite": name, "cells": table,
                                             "timestamp": _now()})
    return {"suite": name, "cells": table}


def _write_suite_table(path: Path, table) -> None:
    keys = []
    for e in table:
        keys += [k for k in e if k not in keys]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for e in table:
            w.writerow([_fmt(e[k]) if k in e else "" for k in keys])


def emit_plots_data(results_dir, out_file=None):
    """Collect per-cell aggregates into long ``(cell, x, y, metric, value)`` rows.

    Returns ``(rows, problems)``; missing or incomplete cells land in
    ``problems`` and are skipped.
    """
    root = Path(results_dir)
    rows, problems = [], []
    dirs = [root] if (root / "summary.json").exists() or (root / INCOMPLETE).exists() else []
    if root.is_dir():
        dirs += sorted(p for p in root.iterdir() if p.is_dir())
    for cell in dirs:
        label = "." if cell == root else cell.name
        if (cell / INCOMPLETE).exists():
            problems.append(f"{label}: incomplete")
            continue
        try:
            with open(cell / "summary.json", encoding="utf-8") as fh:
                summary = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            problems.append(f"{label}: unreadable summary ({exc.__class__.__name__})")
            continue
        if not summary.get("complete"):
            problems.append(f"{label}: incomplete")
            continue
        coords = summary.get("coords", {})
        for metric, value in summary.get("aggregate", {}).items():
            if isinstance(value, (int, float)) and not isinstance(value, bool):
                rows.append((label, coords.get("x", ""), coords.get("y", ""), metric, value))
    for p in problems:
        log.warning("skipping %s", p)
    if out_file is not None:
        with open(out_file, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(PLOT_HEADER)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
    return rows, problems

