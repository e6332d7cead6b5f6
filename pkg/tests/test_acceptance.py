"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import csv
import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from entwave.harness import build_config, emit_outputs, run_experiment
from entwave.harness.experiments import (oracle_equivalence, run_born, run_collapse, run_flux,
                                         run_kmc_front, run_predec)
from entwave.harness.runner import experiment_seed
from entwave.kinetics import PhysicalGasSpec, reduced_units

SMALL = Path(__file__).parent / "golden" / "small_config.json"
CFG = build_config()


@pytest.fixture
def verdict(request, capsys):
    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        request.config.acceptance_lines.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
    return record


def timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


def seed(name):
    return experiment_seed(CFG["seed"], name)


@pytest.fixture(scope="module")
def fkpp_outputs(tmp_path_factory):
    out = tmp_path_factory.mktemp("fkpp")
    report, elapsed = timed(run_experiment, build_config(experiment="fkpp"))
    emit_outputs(report, out)
    return report.metrics["fkpp"], out, elapsed


@pytest.fixture(scope="module")
def collapse_metrics():
    return run_collapse(CFG["collapse"], seed("collapse")).metrics


def test_criterion_01_fkpp_front_speed(fkpp_outputs, verdict):
    m, _, elapsed = fkpp_outputs
    v, target = m["front_speed"]["value"], m["pulled_front_speed"]
    ok = CFG["fkpp"]["dx"] == 0.25 and CFG["fkpp"]["length"] == 200 and \
        abs(v - target) <= 0.03 * target and elapsed < 30
    verdict(1, ok, f"speed {v:.4f} vs {target:.4f} ({abs(v - target) / target:.2%}), {elapsed:.1f} s")


def test_criterion_02_front_profile_shape(fkpp_outputs, verdict):
    m, out, _ = fkpp_outputs
    with open(out / "front_profile.csv", encoding="utf-8") as fh:
        rows = [r for r in csv.DictReader(fh) if r["source"] == "fkpp"]
    x = np.array([float(r["x_minus_front"]) for r in rows])
    f = np.array([float(r["f1"]) for r in rows])
    monotone = bool(np.all(np.diff(f[np.argsort(x)]) <= 1e-12))
    behind, ahead = f[np.argmin(x)], f[np.argmax(x)]
    w = m["width_10_90"]
    ok = monotone and behind > 0.99 and ahead < 0.01 and 2 <= w <= 8 and \
        (out / "front_profile.svg").exists()
    verdict(2, ok, f"monotone={monotone}, f1 behind {behind:.3f}, ahead {ahead:.3g}, width {w:.2f}")


def test_criterion_03_logistic_oracle(fkpp_outputs, verdict):
    m, _, _ = fkpp_outputs
    err = m["logistic_max_error"]
    verdict(3, m["logistic_dt"] == 1e-4 and err <= 1e-6, f"max error {err:.2e} at dt 1e-4")


def test_criterion_04_kmc_continuum(verdict):
    res, elapsed = timed(run_kmc_front, CFG["kmc"], seed("kmc-front"))
    m = res.metrics
    v, se = m["front_speed"]["value"], m["front_speed"]["stderr"]
    cal = m["calibration"]
    ok = m["n_atoms"] == 100_000 and m["replicas"] == 5 and m["within_15_percent"] and elapsed < 300
    verdict(4, ok, f"particle speed {v:.3f} +- {se:.3f} vs continuum {m['continuum_speed']:.4f} "
                   f"({m['relative_deviation']:.1%}); sound speed {m['sound_speed']:.3f}; "
                   f"measured D {cal['diffusivity']:.3f} gives 2 sqrt(D) "
                   f"{cal['pulled_speed_from_diffusivity']:.3f}; {elapsed:.0f} s")


def test_criterion_05_oracle_equivalence(verdict):
    o = oracle_equivalence(4, 5, 1000, 10, 100, seed("kmc-front"))
    ok = o["mismatches"] == 0 and o["random_cases"] == 1000
    verdict(5, ok, f"{o['exhaustive_cases']} exhaustive + {o['random_cases']} random cases, "
                   f"{o['mismatches']} mismatches")


def test_criterion_06_born_rule(verdict):
    cfg = dict(CFG["born"], cases=[[0.3, 0.7], [0.2, 0.3, 0.5]])
    res, elapsed = timed(run_born, cfg, seed("born"))
    two, three = res.metrics["cases"]
    f1 = two["frequencies"]["value"][0]
    ok = cfg["replicas"] == 10_000 and cfg["dt"] == 1e-4 and abs(f1 - 0.3) <= 0.015 \
        and three["within_3sigma"] and elapsed < 120
    verdict(6, ok, f"freq 1 = {f1:.4f}; 3-channel {np.round(three['frequencies']['value'], 4).tolist()} "
                   f"max z {three['max_z']:.2f}; {elapsed:.0f} s")


def test_criterion_07_collapse_time(collapse_metrics, verdict):
    m = collapse_metrics
    t = m["mean_absorption_time"]["value"]
    tx = m["scaled_mean_absorption_time"]["value"]
    ok = m["p0"] == [0.5, 0.5] and abs(t - 2 * math.log(2)) <= 0.1 * 2 * math.log(2) \
        and abs(tx - t / 10) <= 0.1 * t / 10 and m["scaled_K"] == 10 * m["K"]
    verdict(7, ok, f"T(K=1) = {t:.4f} vs {2 * math.log(2):.4f}; T(K=10) = {tx:.4f}; ratio {t / tx:.3f}")


def test_criterion_08_increment_covariance(collapse_metrics, verdict):
    cov = collapse_metrics["covariance"]
    sizes = sorted(len(c["p"]) for c in cov)
    ok = sizes == [2, 3, 5] and all(c["within_3sigma"] for c in cov)
    verdict(8, ok, ", ".join(f"M={len(c['p'])} max z {c['max_z']:.2f}" for c in cov))


def test_criterion_09_decoherence_flux(verdict):
    m = run_flux(CFG["flux"], 0).metrics
    t = m["halving_time_s"]
    verdict(9, 1e-24 <= t <= 9e-24, f"halving time {t:.3e} s, flux {m['flux_per_cm2_s']:.3e} cm^-2 s^-1")


def test_criterion_10_mean_free_path(verdict):
    lam = reduced_units(PhysicalGasSpec.argon_stp()).mean_free_path * 100
    verdict(10, 0.5e-5 <= lam <= 2e-5, f"argon mean free path {lam:.3e} cm")


def test_criterion_11_unitary_monotonicity(verdict):
    m = run_predec(CFG["predec"], seed("predec")).metrics
    ladder = {e["rate"]: e["median_unitary_fraction"] for e in m["ladder"]}
    rates = sorted(ladder)
    ok = rates == [0.0, 0.1, 1.0, 10.0] and m["median_non_increasing"] and ladder[0.0] == 1.0
    verdict(11, ok, "medians " + ", ".join(f"{r:g}: {ladder[r]:.4f}" for r in rates)
            + f"; bridged K {m['bridge']['K']:.4f}")


def test_criterion_12_determinism(tmp_path, verdict):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        proc = subprocess.run([sys.executable, "-m", "entwave.harness.cli", "all", "--config",
                               str(SMALL), "--seed", "2012", "--out", str(out)],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append(out)
    names = sorted(p.name for p in outs[0].iterdir() if p.suffix in (".json", ".csv"))
    same = [(outs[0] / n).read_bytes() == (outs[1] / n).read_bytes() for n in names]
    doc = json.loads((outs[0] / "report.json").read_text())
    ok = all(same) and "report.json" in names and not doc["errors"]
    verdict(12, ok, f"{sum(same)}/{len(names)} files byte-identical across two runs of 'all'")
