"""Experiment dispatch and report assembly."""

from __future__ import annotations

import time
import traceback

from .. import __version__
from ..seeding import derive_seed
from .config import EXPERIMENTS, validate
from .experiments import RUNNERS, profile_figure, run_bridge
from .outputs import HEADERS, RunReport, Table

# experiment seeds live far from replica indices
EXPERIMENT_OFFSET = 1_000_000


def experiment_seed(master: int, name: str) -> int:
    return derive_seed(master, EXPERIMENT_OFFSET + EXPERIMENTS.index(name))


def run_experiment(cfg: dict) -> RunReport:
    """Run ``cfg['experiment']`` (or every experiment for ``all``).

    A failing experiment is recorded in ``report.errors`` and the remaining
    ones still run.
    """
    validate(cfg)
    start = time.perf_counter()
    report = RunReport(config=cfg, provenance={"seed": cfg["seed"], "version": __version__})
    names = list(RUNNERS) if cfg["experiment"] == "all" else [cfg["experiment"]]
    profiles = {}
    for name in names:
        section, fn = RUNNERS[name]
        try:
            result = fn(cfg[section], experiment_seed(cfg["seed"], name), cfg["workers"])
        except Exception as exc:  # recorded, the run carries on
            report.errors.append({"experiment": name, "type": type(exc).__name__,
                                  "message": str(exc),
                                  "where": traceback.format_exception_only(type(exc), exc)[-1].strip()})
            continue
        report.metrics[name] = result.metrics
        report.tables.update(result.tables)
        profiles.update(result.profiles)
    if cfg["experiment"] == "all" and "predec" in report.metrics:
        K = report.metrics["predec"]["bridge"]["K"]
        try:
            report.metrics["bridge"] = run_bridge(K, cfg["collapse"],
                                                  experiment_seed(cfg["seed"], "all"))
        except Exception as exc:
            report.errors.append({"experiment": "bridge", "type": type(exc).__name__,
                                  "message": str(exc), "where": ""})
    if profiles:
        table = Table(HEADERS["front_profile.csv"])
        for source in sorted(profiles):
            table.rows.extend((source, float(x), float(f)) for x, f in profiles[source])
        report.tables["front_profile.csv"] = table
        report.figures["front_profile.svg"] = profile_figure(profiles)
    report.wall_time = time.perf_counter() - start
    return report
