"""Run configuration: presets, JSON ingestion and validation."""

from __future__ import annotations

import copy
import json
import math
from pathlib import Path
from typing import Any, Optional

from ..continuum import max_stable_dt
from ..errors import ValidationError

EXPERIMENTS = ("kmc-front", "fkpp", "predec", "collapse", "born", "flux", "all")

DEFAULTS: dict[str, Any] = {
    "experiment": "all",
    "seed": 2012,
    "replicas": None,
    "workers": 1,
    "output_dir": "entwave-out",
    "kmc": {
        "n_atoms": 100000,
        "box": [200.0, 3.5, 3.5],
        "seed_width": 2.0,
        "dt": 0.1,
        "t_max": 60.0,
        "record_interval": 2.0,
        "bin_width": 0.5,
        "fit_window": [20.0, 60.0],
        "replicas": 5,
        "oracle_random_cases": 1000,
        "oracle_random_atoms": 10,
        "oracle_random_collisions": 100,
        "oracle_exhaustive_atoms": 4,
        "oracle_exhaustive_length": 5,
    },
    "fkpp": {
        "length": 200.0,
        "dx": 0.25,
        "dt": 0.05,
        "t_max": 100.0,
        "record_interval": 1.0,
        "fit_window": [50.0, 100.0],
        "scheme": "split",
        "logistic_f0": 0.1,
        "logistic_dt": 1e-4,
        "logistic_t_max": 10.0,
    },
    "predec": {
        "n_atoms": 10000,
        "box": [6.0, 6.0, 6.0],
        "rates": [0.0, 0.1, 1.0, 10.0],
        "t_max": 30.0,
        "dt": 0.1,
        "window": 5.0,
        "mode": "spherical",
        "replicas": 5,
        "kappa": 1.0,
        "bridge_rate": 1.0,
    },
    "collapse": {
        "p0": [0.5, 0.5],
        "K": 1.0,
        "K_scaling": 10.0,
        "dt": 1e-4,
        "epsilon": 1e-6,
        "replicas": 10000,
        "covariance_samples": 100000,
        "covariance_dt": 1e-3,
        "covariance_points": [[0.5, 0.5], [0.2, 0.3, 0.5], [0.1, 0.15, 0.2, 0.25, 0.3]],
        "bridge_replicas": 1000,
    },
    "born": {
        "cases": [[0.3, 0.7], [0.2, 0.3, 0.5]],
        "K": 1.0,
        "dt": 1e-4,
        "epsilon": 1e-6,
        "replicas": 10000,
    },
    "flux": {
        "pressure": 101325.0,
        "temperature": 300.0,
        "molecular_mass_u": 28.0,
        "area_cm2": 1.0,
        "gas_diameter": 3.64e-10,
        "gas_number_density": 2.69e25,
        "gas_temperature": 273.15,
        "gas_molar_mass": 39.948e-3,
        "gas_gamma": 5.0 / 3.0,
    },
}

PRESETS: dict[str, dict[str, Any]] = {
    "argon-counter": {},
    "figure2": {
        "experiment": "fkpp",
        "fkpp": {"dx": 0.125, "dt": 0.02, "record_interval": 0.5},
    },
    "born-table": {
        "experiment": "born",
        "born": {"cases": [[0.5, 0.5], [0.3, 0.7], [0.1, 0.9], [0.2, 0.3, 0.5],
                           [0.25, 0.25, 0.25, 0.25]]},
    },
}

SECTIONS = ("kmc", "fkpp", "predec", "collapse", "born", "flux")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _unknown_keys(data: dict, ref: dict, prefix: str = "") -> list[str]:
    bad = []
    for k, v in data.items():
        name = f"{prefix}{k}"
        if k not in ref:
            bad.append(f"unknown key '{name}'")
        elif isinstance(ref[k], dict):
            if not isinstance(v, dict):
                bad.append(f"'{name}' must be an object")
            else:
                bad.extend(_unknown_keys(v, ref[k], name + "."))
    return bad


def _num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _positive(cfg, problems, section, *keys):
    for k in keys:
        v = cfg[section][k]
        if not (_num(v) and v > 0):
            problems.append(f"'{section}.{k}' must be a positive number, got {v!r}")


def _count(cfg, problems, section, key, minimum):
    v = cfg[section][key]
    if not (isinstance(v, int) and not isinstance(v, bool) and v >= minimum):
        problems.append(f"'{section}.{key}' must be an integer >= {minimum}, got {v!r}")


def _box(cfg, problems, section):
    b = cfg[section]["box"]
    if not (isinstance(b, list) and len(b) == 3 and all(_num(x) and x > 0 for x in b)):
        problems.append(f"'{section}.box' must be three positive lengths, got {b!r}")


def _window(cfg, problems, section, key):
    w = cfg[section][key]
    if not (isinstance(w, list) and len(w) == 2 and all(_num(x) for x in w) and w[0] < w[1]):
        problems.append(f"'{section}.{key}' must be [start, end] with start < end, got {w!r}")


def _simplex(p, name, problems):
    if not (isinstance(p, list) and len(p) >= 2 and all(_num(x) and x >= 0 for x in p)
            and abs(sum(p) - 1.0) <= 1e-9):
        problems.append(f"'{name}' must be a probability vector of length >= 2, got {p!r}")


def validate(cfg: dict) -> None:
    """Raise :class:`ValidationError` listing every offending key."""
    problems = _unknown_keys(cfg, DEFAULTS)
    if problems:
        raise ValidationError(problems)
    if cfg["experiment"] not in EXPERIMENTS:
        problems.append(f"'experiment' must be one of {', '.join(EXPERIMENTS)}, got {cfg['experiment']!r}")
    seed = cfg["seed"]
    if not (isinstance(seed, int) and not isinstance(seed, bool) and 0 <= seed < 2**64):
        problems.append(f"'seed' must be a 64-bit unsigned integer, got {seed!r}")
    r = cfg["replicas"]
    if r is not None and not (isinstance(r, int) and not isinstance(r, bool) and r >= 1):
        problems.append(f"'replicas' must be a positive integer, got {r!r}")
    if not (isinstance(cfg["workers"], int) and cfg["workers"] >= 1):
        problems.append(f"'workers' must be a positive integer, got {cfg['workers']!r}")
    if not isinstance(cfg["output_dir"], str):
        problems.append("'output_dir' must be a string")

    _count(cfg, problems, "kmc", "n_atoms", 0)
    _box(cfg, problems, "kmc")
    _positive(cfg, problems, "kmc", "seed_width", "dt", "t_max", "record_interval", "bin_width")
    _window(cfg, problems, "kmc", "fit_window")
    _count(cfg, problems, "kmc", "replicas", 1)
    if _num(cfg["kmc"]["dt"]) and cfg["kmc"]["dt"] > 0.2:
        problems.append(f"'kmc.dt' must not exceed 0.2 mean free times, got {cfg['kmc']['dt']!r}")
    for key, lo in (("oracle_random_cases", 0), ("oracle_random_collisions", 0),
                    ("oracle_exhaustive_length", 0), ("oracle_random_atoms", 2),
                    ("oracle_exhaustive_atoms", 2)):
        _count(cfg, problems, "kmc", key, lo)
    for key in ("oracle_random_atoms", "oracle_exhaustive_atoms"):
        v = cfg["kmc"][key]
        if isinstance(v, int) and v > 12:
            problems.append(f"'kmc.{key}' exceeds the oracle cap of 12 atoms")

    f = cfg["fkpp"]
    _positive(cfg, problems, "fkpp", "length", "dx", "dt", "t_max", "record_interval",
              "logistic_dt", "logistic_t_max")
    _window(cfg, problems, "fkpp", "fit_window")
    if f["scheme"] not in ("split", "euler"):
        problems.append(f"'fkpp.scheme' must be 'split' or 'euler', got {f['scheme']!r}")
    if _num(f["dx"]) and _num(f["dt"]) and f["dx"] > 0 and f["dt"] > max_stable_dt(f["dx"]):
        problems.append(f"'fkpp.dt'={f['dt']!r} exceeds the stability bound {max_stable_dt(f['dx']):.6g}")
    if _num(f["logistic_dt"]) and f["logistic_dt"] > max_stable_dt(1.0):
        problems.append("'fkpp.logistic_dt' exceeds the stability bound")
    if not (_num(f["logistic_f0"]) and 0 <= f["logistic_f0"] <= 1):
        problems.append(f"'fkpp.logistic_f0' must lie in [0, 1], got {f['logistic_f0']!r}")

    p = cfg["predec"]
    _count(cfg, problems, "predec", "n_atoms", 0)
    _box(cfg, problems, "predec")
    _positive(cfg, problems, "predec", "t_max", "dt", "window")
    _count(cfg, problems, "predec", "replicas", 1)
    if not (isinstance(p["rates"], list) and p["rates"] and all(_num(x) and x >= 0 for x in p["rates"])):
        problems.append(f"'predec.rates' must be non-negative numbers, got {p['rates']!r}")
    if p["mode"] not in ("spherical", "planar"):
        problems.append(f"'predec.mode' must be 'spherical' or 'planar', got {p['mode']!r}")
    for key in ("kappa", "bridge_rate"):
        if not (_num(p[key]) and p[key] >= 0):
            problems.append(f"'predec.{key}' must be non-negative, got {p[key]!r}")
    if _num(p["dt"]) and p["dt"] > 0.2:
        problems.append("'predec.dt' must not exceed 0.2 mean free times")

    c = cfg["collapse"]
    _simplex(c["p0"], "collapse.p0", problems)
    _positive(cfg, problems, "collapse", "K", "K_scaling", "dt", "covariance_dt")
    _count(cfg, problems, "collapse", "replicas", 100)
    _count(cfg, problems, "collapse", "bridge_replicas", 100)
    _count(cfg, problems, "collapse", "covariance_samples", 2)
    if not (_num(c["epsilon"]) and 0 < c["epsilon"] < 1e-3):
        problems.append(f"'collapse.epsilon' must lie in (0, 1e-3), got {c['epsilon']!r}")
    if not isinstance(c["covariance_points"], list):
        problems.append("'collapse.covariance_points' must be a list of probability vectors")
    else:
        for i, q in enumerate(c["covariance_points"]):
            _simplex(q, f"collapse.covariance_points[{i}]", problems)

    b = cfg["born"]
    _positive(cfg, problems, "born", "K", "dt")
    _count(cfg, problems, "born", "replicas", 100)
    if not (_num(b["epsilon"]) and 0 < b["epsilon"] < 1e-3):
        problems.append(f"'born.epsilon' must lie in (0, 1e-3), got {b['epsilon']!r}")
    if not (isinstance(b["cases"], list) and b["cases"]):
        problems.append("'born.cases' must be a non-empty list of probability vectors")
    else:
        for i, q in enumerate(b["cases"]):
            _simplex(q, f"born.cases[{i}]", problems)

    _positive(cfg, problems, "flux", *DEFAULTS["flux"].keys())
    if problems:
        raise ValidationError(problems)


def build_config(file_config: Optional[dict] = None, preset: Optional[str] = None,
                 **overrides) -> dict:
    """Defaults < preset < file < explicit overrides (``None`` values skipped)."""
    if preset is not None and preset not in PRESETS:
        raise ValidationError([f"unknown preset '{preset}' (known: {', '.join(PRESETS)})"])
    cfg = copy.deepcopy(DEFAULTS)
    if preset:
        cfg = _merge(cfg, PRESETS[preset])
    if file_config:
        if not isinstance(file_config, dict):
            raise ValidationError(["configuration document must be a JSON object"])
        problems = _unknown_keys(file_config, DEFAULTS)
        if problems:
            raise ValidationError(problems)
        cfg = _merge(cfg, file_config)
    for k, v in overrides.items():
        if v is not None:
            cfg[k] = v
    validate(cfg)
    if cfg["replicas"] is not None:
        for sec in ("kmc", "predec", "collapse", "born"):
            cfg[sec]["replicas"] = cfg["replicas"]
        validate(cfg)
    return cfg


def load_config(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError([f"config file is not valid JSON: {exc}"]) from exc
