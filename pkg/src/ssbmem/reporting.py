"""Report emission: CSV data, structured-text summary, manifest, figures.

A report directory is self-describing: the manifest records the full
configuration and master seed so the run can be reproduced exactly, the
CSV files carry the data, summary.txt the headline numbers, and the
figures are rendered from the same data. ``render_report`` re-creates
summary and figures from a saved directory without re-running anything.
"""

from __future__ import annotations

import csv
import os

import numpy as np
import yaml

from . import __version__
from .config import from_dict, to_dict
from .dsp import read_stats_csv, write_stats_csv
from .figures import render_run_figures, render_sweep_figures
from .runner import RunResult, SweepResult

MANIFEST_NAME = "manifest.yaml"
SUMMARY_NAME = "summary.txt"
SWEEP_CSV_NAME = "sweep.csv"


def _write_manifest(cfg, kind, outdir):
    doc = {
        "kind": kind,
        "master_seed": cfg.sequence.master_seed,
        "package_version": __version__,
        "config": to_dict(cfg),
    }
    with open(os.path.join(outdir, MANIFEST_NAME), "w") as f:
        yaml.safe_dump(doc, f, sort_keys=True)


def load_manifest(outdir):
    with open(os.path.join(outdir, MANIFEST_NAME)) as f:
        doc = yaml.safe_load(f)
    return doc["kind"], from_dict(doc["config"])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_summary(lines, outdir):
    with open(os.path.join(outdir, SUMMARY_NAME), "w") as f:
        f.write("\n".join(lines) + "\n")


def emit_run_report(result: RunResult, outdir, figures: bool = True) -> list:
    """Write all artifacts of a sequence run; returns the file list."""
    if result.signal_raw.times.size == 0:
        raise ValueError("empty results: nothing to report")
    os.makedirs(outdir, exist_ok=True)
    files = []
    for name, stats in (
        ("signal_raw.csv", result.signal_raw),
        ("blank_raw.csv", result.blank_raw),
        ("subtracted.csv", result.subtracted),
        ("subtracted_norm.csv", result.subtracted_norm),
        ("calibration.csv", result.calibration),
    ):
        path = os.path.join(outdir, name)
        write_stats_csv(stats, path)
        files.append(path)

    lines = [f"{k} = {_fmt(v)}" for k, v in result.metrics.items()]
    if result.tv is not None:
        lines.append("")
        lines.extend(result.tv.to_text().rstrip().splitlines())
    _write_summary(lines, outdir)
    files.append(os.path.join(outdir, SUMMARY_NAME))

    _write_manifest(result.config, "run", outdir)
    files.append(os.path.join(outdir, MANIFEST_NAME))
    if figures:
        files.extend(render_run_figures(result, outdir))
    return files


def emit_sweep_report(result: SweepResult, outdir,
                      figures: bool = True) -> list:
    """Write the sweep CSV (one row per grid point), summary, manifest."""
    if not result.rows:
        raise ValueError("empty results: nothing to report")
    os.makedirs(outdir, exist_ok=True)
    files = []
    cols = result.columns
    path = os.path.join(outdir, SWEEP_CSV_NAME)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(cols)
        for row in result.rows:
            w.writerow([_fmt(row[c]) if c in row else "" for c in cols])
    files.append(path)

    lines = [f"kind = {result.kind}",
             f"points = {len(result.rows)}",
             f"errors = {sum('error' in r for r in result.rows)}"]
    if result.fit:
        for k, v in result.fit.items():
            lines.append(f"fit_{k} = {_fmt(v)}")
    verdicts = [r.get("verdict") for r in result.rows if r.get("verdict")]
    if verdicts:
        lines.append("verdicts = " + ",".join(verdicts))
    _write_summary(lines, outdir)
    files.append(os.path.join(outdir, SUMMARY_NAME))

    _write_manifest(result.config, "sweep", outdir)
    files.append(os.path.join(outdir, MANIFEST_NAME))
    if figures:
        files.extend(render_sweep_figures(result, outdir))
    return files


def read_sweep_csv(path) -> list:
    rows = []
    with open(path, newline="") as f:
        r = csv.reader(f)
        cols = next(r)
        for raw in r:
            row = {}
            for k, v in zip(cols, raw):
                if v == "":
                    continue
                try:
                    row[k] = float(v)
                except ValueError:
                    row[k] = v
            rows.append(row)
    return rows


def render_report(outdir) -> list:
    """Re-render summary and figures from the saved data in a report
    directory (no simulation)."""
    kind, cfg = load_manifest(outdir)
    files = []
    if kind == "sweep":
        rows = read_sweep_csv(os.path.join(outdir, SWEEP_CSV_NAME))
        from .runner import SweepResult, _sweep_fit
        sweep_kind = cfg.sweep.kind if cfg.sweep else "storage_time"
        result = SweepResult(sweep_kind, rows, _sweep_fit(sweep_kind, rows),
                             cfg)
        lines = [f"kind = {result.kind}", f"points = {len(rows)}",
                 f"errors = {sum('error' in r for r in rows)}"]
        if result.fit:
            lines.extend(f"fit_{k} = {_fmt(v)}" for k, v in result.fit.items())
        _write_summary(lines, outdir)
        files.extend(render_sweep_figures(result, outdir))
        return files

    # run directory: rebuild traces from the CSVs
    sub_norm = read_stats_csv(os.path.join(outdir, "subtracted_norm.csv"))
    sig_norm = read_stats_csv(os.path.join(outdir, "signal_raw.csv"))

    class _View:
        pass

    view = _View()
    view.subtracted_norm = sub_norm
    view.signal_norm = sig_norm
    view.corrected_var_x = sub_norm.var_x - 1.0
    view.corrected_var_y = sub_norm.var_y - 1.0
    view.tv = None
    files.extend(render_run_figures(view, outdir))
    return files
