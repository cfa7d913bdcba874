"""CSV/JSON writers and readers for cell summaries, plus a tiny SVG line chart.

Floats are written with ``repr`` (shortest round-tripping form), so reading a
file back reproduces every number exactly.
"""
from __future__ import annotations

import csv
import io
import json
from datetime import datetime, timezone
from typing import IO, Iterable, Optional, Sequence
from xml.sax.saxutils import escape

from . import __version__
from .engine import TrialResult
from .harness import CellSummary

CSV_COLUMNS = (
    "swept_param", "swept_value", "n_labs", "d", "p_c", "u_c", "u_r", "c", "f", "t",
    "rounds", "trials", "master_seed",
    "prop_risky", "ci_risky_lo", "ci_risky_hi",
    "prop_conservative", "ci_cons_lo", "ci_cons_hi",
    "prop_mixed", "ci_mixed_lo", "ci_mixed_hi",
    "mean_fixation_round",
)
_INT_COLUMNS = {"n_labs", "d", "rounds", "trials", "master_seed"}
_STR_COLUMNS = {"swept_param"}

TRACE_COLUMNS = ("trial_index", "round", "n_risky", "mean_risky_rate")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def summary_row(s: CellSummary) -> dict:
    p = s.params
    return {
        "swept_param": s.swept_param or "",
        "swept_value": s.swept_value,
        "n_labs": p.n_labs, "d": p.d, "p_c": p.p_c, "u_c": p.u_c, "u_r": p.u_r,
        "c": p.c, "f": p.f, "t": p.t, "rounds": p.rounds,
        "trials": s.n_trials, "master_seed": s.master_seed,
        "prop_risky": s.prop_risky, "ci_risky_lo": s.ci_risky[0], "ci_risky_hi": s.ci_risky[1],
        "prop_conservative": s.prop_conservative,
        "ci_cons_lo": s.ci_conservative[0], "ci_cons_hi": s.ci_conservative[1],
        "prop_mixed": s.prop_mixed, "ci_mixed_lo": s.ci_mixed[0], "ci_mixed_hi": s.ci_mixed[1],
        "mean_fixation_round": s.mean_fixation_round,
    }


def write_csv(summaries: Iterable[CellSummary], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for s in summaries:
        row = summary_row(s)
        writer.writerow([_fmt(row[col]) for col in CSV_COLUMNS])


def _parse(col: str, text: str):
    if col in _STR_COLUMNS:
        return text or None
    if text == "":
        return None
    if col in _INT_COLUMNS:
        return int(text)
    if col == "swept_value":
        # integer-valued parameters are written without a decimal point
        return int(text) if text.lstrip("-").isdigit() else float(text)
    return float(text)


def read_csv(fh: IO[str]) -> list[dict]:
    reader = csv.DictReader(fh)
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header: {reader.fieldnames}")
    return [{col: _parse(col, row[col]) for col in CSV_COLUMNS} for row in reader]


def write_json(summaries: Iterable[CellSummary], fh: IO[str], *, config: Optional[dict] = None,
               timestamp: bool = True) -> None:
    metadata = {"tool": "riskysci", "version": __version__}
    if timestamp:
        metadata["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    if config is not None:
        metadata["config"] = config
    rows = [summary_row(s) for s in summaries]
    for row in rows:
        row["swept_param"] = row["swept_param"] or None
    json.dump({"metadata": metadata, "cells": rows}, fh, indent=2)
    fh.write("\n")


def read_json(fh: IO[str]) -> dict:
    return json.load(fh)


def write_trace(results: Sequence[TrialResult], fh: IO[str]) -> None:
    """Per-round composition of each trial.

    One row per (trial, completed round); round 0 is the founding population.
    ``mean_risky_rate`` is empty once no risky labs remain. Trials that stop
    early at fixation have no rows past their fixation round.
    """
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for res in results:
        if res.trace is None:
            raise ValueError("trial was run without trace=True")
        for r, (k, rate) in enumerate(zip(res.trace.n_risky, res.trace.mean_risky_rate)):
            writer.writerow([res.seed.trial_index, r, int(k), "" if rate != rate else repr(float(rate))])


_SERIES = (
    ("risky", "prop_risky", "#d62728"),
    ("conservative", "prop_conservative", "#1f77b4"),
    ("both", "prop_mixed", "#7f7f7f"),
)


def svg_chart(summaries: Sequence[CellSummary], title: str = "") -> str:
    """Line chart of the three outcome proportions against the swept value.

    Points are spaced evenly by cell index (the d grid is not linear), with
    the swept values as tick labels.
    """
    width, height = 640, 400
    left, right, top, bottom = 60, 130, 40, 50
    pw, ph = width - left - right, height - top - bottom
    n = len(summaries)

    def x(i: int) -> float:
        return left + (pw * i / (n - 1) if n > 1 else pw / 2)

    def y(v: float) -> float:
        return top + ph * (1 - v)

    out = io.StringIO()
    out.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
              f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">\n')
    out.write(f'<rect width="{width}" height="{height}" fill="white"/>\n')
    if title:
        out.write(f'<text x="{left + pw / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>\n')
    out.write(f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>\n')
    out.write(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>\n')
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        out.write(f'<line x1="{left - 4}" y1="{y(tick):.1f}" x2="{left}" y2="{y(tick):.1f}" stroke="black"/>\n')
        out.write(f'<text x="{left - 8}" y="{y(tick) + 4:.1f}" text-anchor="end">{tick:g}</text>\n')
    for i, s in enumerate(summaries):
        label = "" if s.swept_value is None else f"{s.swept_value:g}"
        out.write(f'<text x="{x(i):.1f}" y="{top + ph + 18}" text-anchor="middle">{label}</text>\n')
    xlabel = summaries[0].swept_param if summaries and summaries[0].swept_param else ""
    out.write(f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>\n')
    for k, (name, attr, colour) in enumerate(_SERIES):
        pts = " ".join(f"{x(i):.1f},{y(getattr(s, attr)):.1f}" for i, s in enumerate(summaries))
        out.write(f'<polyline fill="none" stroke="{colour}" stroke-width="2" points="{pts}"/>\n')
        ly = top + 20 * k + 10
        out.write(f'<line x1="{left + pw + 15}" y1="{ly}" x2="{left + pw + 40}" y2="{ly}" '
                  f'stroke="{colour}" stroke-width="2"/>\n')
        out.write(f'<text x="{left + pw + 45}" y="{ly + 4}">{name}</text>\n')
    out.write("</svg>\n")
    return out.getvalue()
