"""Run report structure and file emission."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

SCHEMA_VERSION = 1

# documented CSV headers; golden tests pin these
HEADERS = {
    "fkpp_history.csv": ("time", "x", "f1"),
    "front_profile.csv": ("source", "x_minus_front", "f1"),
    "kmc_history.csv": ("replica", "time", "distance", "f1"),
    "predec_unitary.csv": ("rate", "replica", "window_start", "window_end", "collisions",
                           "unitary", "fraction"),
    "predec_arrivals.csv": ("rate", "replica", "id", "time", "x", "y", "z", "phase", "face"),
    "collapse_outcomes.csv": ("replica", "winner", "absorption_time", "seed"),
    "collapse_scaling_outcomes.csv": ("replica", "winner", "absorption_time", "seed"),
    "born_outcomes.csv": ("case", "replica", "winner", "absorption_time", "seed"),
    "born_frequencies.csv": ("case", "channel", "p0", "frequency", "stderr"),
}


@dataclass
class Table:
    header: tuple[str, ...]
    rows: list = field(default_factory=list)


@dataclass
class RunReport:
    config: dict
    metrics: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)
    tables: dict[str, Table] = field(default_factory=dict)
    figures: dict[str, str] = field(default_factory=dict)
    wall_time: Optional[float] = None

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_json(self) -> str:
        """Canonical JSON.  Wall time and the output location are left out so
        reruns of one configuration compare byte for byte."""
        config = {k: v for k, v in self.config.items() if k != "output_dir"}
        doc = {"schema_version": SCHEMA_VERSION, "config": config, "metrics": self.metrics,
               "provenance": self.provenance, "errors": self.errors}
        return json.dumps(jsonable(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def jsonable(obj: Any) -> Any:
    """Plain JSON types; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(table: Table) -> str:
    lines = [",".join(table.header)]
    lines.extend(",".join(_cell(v) for v in row) for row in table.rows)
    return "\n".join(lines) + "\n"


def emit_outputs(report: RunReport, directory) -> list[str]:
    """Write report.json, the CSV tables and SVG figures; return the file names.

    Files are written under temporary names and renamed at the end; on any
    failure everything written so far is removed.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    payload = {"report.json": report.to_json()}
    for name in sorted(report.tables):
        payload[name] = csv_text(report.tables[name])
    for name in sorted(report.figures):
        payload[name] = report.figures[name]
    staged: list[Path] = []
    final: list[Path] = []
    try:
        for name, text in payload.items():
            tmp = out / f".{name}.partial"
            staged.append(tmp)
            with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        for name in payload:
            os.replace(out / f".{name}.partial", out / name)
            final.append(out / name)
    except BaseException:
        for p in staged + final:
            try:
                p.unlink()
            except FileNotFoundError:
                pass
        raise
    return list(payload)
