"""Versioned text formats for fields, schedules, trajectories, tables and plan reports."""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .grid import TorusField, TorusGrid
from .propagators import Schedule, Segment, Trajectory

FIELD_HEADER = "# kgcontrol-field v1"
SCHEDULE_HEADER = "# kgcontrol-schedule v1"
TRAJECTORY_HEADER = "# kgcontrol-trajectory v1"
TABLE_HEADER = "# kgcontrol-table v1"
REPORT_FORMAT = "kgcontrol-report/1"


class FormatError(ValueError):
    pass


def _header_fields(line: str, expected: str) -> dict:
    if not line.startswith(expected):
        raise FormatError(f"expected header {expected!r}, got {line.strip()!r}")
    out = {}
    for tok in line[len(expected):].split():
        k, _, v = tok.partition("=")
        out[k] = v
    return out


def _fmt(x: float) -> str:
    return repr(float(x))


# --- fields ----------------------------------------------------------------------

def write_field(path, f: TorusField) -> None:
    g = f.grid
    lines = [f"{FIELD_HEADER} dim={g.dim} n={g.n}"]
    lines += [_fmt(v) for v in f.physical.ravel()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_field(path) -> TorusField:
    text = Path(path).read_text().splitlines()
    meta = _header_fields(text[0], FIELD_HEADER)
    grid = TorusGrid(int(meta["dim"]), int(meta["n"]))
    vals = np.array([float(v) for v in text[1:] if v.strip()])
    if vals.size != grid.size:
        raise FormatError(f"field file has {vals.size} values, grid needs {grid.size}")
    return TorusField(grid, vals.reshape(grid.shape))


# --- schedules -----------------------------------------------------------------

def schedule_to_text(s: Schedule) -> str:
    cols = ["duration"] + [f"u{j}" for j in range(2 * s.dim + 1)]
    lines = [f"{SCHEDULE_HEADER} dim={s.dim} segments={len(s)}", "# " + " ".join(cols)]
    lines += [" ".join(_fmt(v) for v in (seg.duration,) + seg.u) for seg in s.segments]
    return "\n".join(lines) + "\n"


def schedule_from_text(text: str) -> Schedule:
    rows = text.splitlines()
    meta = _header_fields(rows[0], SCHEDULE_HEADER)
    dim = int(meta["dim"])
    segs = []
    for row in rows[1:]:
        if not row.strip() or row.startswith("#"):
            continue
        vals = [float(v) for v in row.split()]
        segs.append(Segment(vals[0], tuple(vals[1:])))
    return Schedule(dim, tuple(segs))


def write_schedule(path, s: Schedule) -> None:
    Path(path).write_text(schedule_to_text(s))


def read_schedule(path) -> Schedule:
    return schedule_from_text(Path(path).read_text())


# --- tables ----------------------------------------------------------------------

def table_to_text(columns: list[str], rows: list, title: str = "") -> str:
    lines = [f"{TABLE_HEADER} {title}".rstrip(), "# " + " ".join(columns)]
    for row in rows:
        lines.append(" ".join(_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else f"{float(v):.10g}"
    return str(v).replace(" ", "_")


def write_table(path, columns, rows, title: str = "") -> None:
    Path(path).write_text(table_to_text(columns, rows, title))


def write_trajectory(path, traj: Trajectory) -> None:
    cols = ["t", "energy_norm", "profile_H1", "velocity_L2", "profile_min"]
    text = table_to_text(cols, traj.summary_rows())
    Path(path).write_text(text.replace(TABLE_HEADER, TRAJECTORY_HEADER, 1))


# --- JSON reports ----------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def report_to_json(doc: dict) -> str:
    doc = {"format": REPORT_FORMAT, **doc}
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def write_report(path, doc: dict) -> None:
    Path(path).write_text(report_to_json(doc))


def read_report(path) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != REPORT_FORMAT:
        raise FormatError(f"unknown report format {doc.get('format')!r}")
    return doc


def plan_report_doc(rep, r_compare: float | None = None) -> dict:
    """Plain-data view of a PlanReport."""
    doc = {
        "achieved_error": rep.achieved_error,
        "total_time": rep.total_time,
        "segments": len(rep.schedule),
        "max_amplitude": rep.schedule.max_amplitude,
        "stages": [{"name": s.name, "target": s.target, "error": s.error} for s in rep.stages],
        "checks": [{"name": c.name, "passed": c.passed, "value": c.value} for c in rep.checks],
        "flags": list(rep.flags),
        "info": dict(rep.info),
    }
    if r_compare is not None:
        doc["inscribed_radius"] = r_compare
        doc["time_minus_radius"] = rep.total_time - r_compare
    return doc


def digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]
