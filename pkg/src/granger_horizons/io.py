"""File formats: VAR model JSON, time-series CSV, fit JSON and GC graph JSON/CSV.

Variable indices in GC graph files are 1-based (matching the ``v1..vn`` CSV
header); the Python API is 0-based.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from .errors import DimensionError
from .estimation import FitResult
from .gc import GCCell, GCGraph
from .simulation import TimeSeries
from .var_model import VARModel

PathLike = Union[str, Path]

GRAPH_COLUMNS = ("x", "y", "tau", "h", "F", "dof", "pvalue", "significant")


def save_model(model: VARModel, path: PathLike) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=1) + "\n")


def load_model(path: PathLike) -> VARModel:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DimensionError(f"{path}: not valid JSON ({exc})") from None
    return VARModel.from_dict(d)


def save_fit(fit: FitResult, path: PathLike) -> None:
    Path(path).write_text(json.dumps(fit.to_dict(), indent=1) + "\n")


def write_series_csv(ts: TimeSeries, path: PathLike, header: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(",".join(f"v{i + 1}" for i in range(ts.n)) + "\n")
        for row in ts.data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_series_csv(path: PathLike) -> TimeSeries:
    """Read a ``T x n`` CSV; a first row that does not parse as numbers is a header."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DimensionError(f"{path}: empty file")
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        rows = rows[1:]
    try:
        data = np.array([[float(v) for v in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise DimensionError(f"{path}: non-numeric entry ({exc})") from None
    if data.ndim != 2 or data.shape[0] == 0:
        raise DimensionError(f"{path}: ragged or empty data")
    return TimeSeries(data, {"source": str(path)})


def _num(v: Optional[float]) -> Optional[float]:
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def _cell_dict(c: GCCell) -> dict[str, Any]:
    return {
        "x": c.x + 1,
        "y": c.y + 1,
        "tau": c.tau,
        "h": c.h,
        "F": float(c.F),
        "dof": c.dof,
        "pvalue": _num(c.pvalue),
        "significant": bool(c.significant),
    }


def graph_to_dict(g: GCGraph) -> dict[str, Any]:
    d: dict[str, Any] = {
        "variant": g.variant,
        "n": g.n,
        "p": g.p,
        "alpha": g.alpha,
        "correction": g.correction,
        "m": g.m,
        "N": g.N,
        "cells": [_cell_dict(c) for c in g.cells],
    }
    if g.extra:
        d["extra"] = g.extra
    return d


def graph_to_json(g: GCGraph) -> str:
    return json.dumps(graph_to_dict(g), indent=1) + "\n"


def graph_to_csv(g: GCGraph) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GRAPH_COLUMNS)
    for c in g.cells:
        d = _cell_dict(c)
        w.writerow(["" if d[k] is None else (repr(d[k]) if isinstance(d[k], float) else d[k])
                    for k in GRAPH_COLUMNS])
    return buf.getvalue()


def graph_from_dict(d: dict[str, Any]) -> GCGraph:
    cells = tuple(
        GCCell(c["x"] - 1, c["y"] - 1, c["F"], tau=c["tau"], h=c["h"], dof=c["dof"],
               pvalue=c["pvalue"], significant=c["significant"])
        for c in d["cells"]
    )
    n = d.get("n") or (max([c.x for c in cells] + [c.y for c in cells]) + 1 if cells else 0)
    return GCGraph(d["variant"], n, d["p"], d["alpha"], d.get("correction", "bonferroni"),
                   d.get("m", len(cells)), d.get("N"), cells, d.get("extra", {}))
