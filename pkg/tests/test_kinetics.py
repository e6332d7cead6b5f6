import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from entwave.errors import CapacityError, DomainError
from entwave.kinetics import (ConnectTag, GridSpec, PhysicalGasSpec, Slab, TrackSegment,
                              coarse_grain, component_oracle, dsmc_step, fold_tags, init_gas,
                              monatomic_sound_speed, or_rule, reduced_units, run_contagion,
                              seed_track)


@pytest.mark.parametrize("a,b,out", [(0, 0, 0), (1, 1, 1), (1, 0, 1), (0, 1, 1)])
def test_or_rule_table(a, b, out):
    assert or_rule(a, b) == (ConnectTag(out), ConnectTag(out))


@given(st.integers(0, 1), st.integers(0, 1))
def test_or_rule_symmetric(a, b):
    x, y = or_rule(a, b)
    assert (y, x) == or_rule(b, a)


def test_argon_mean_free_path():
    s = reduced_units(PhysicalGasSpec.argon_stp())
    assert s.mean_free_path == pytest.approx(6.3e-8, rel=0.02)
    assert s.sound_speed_reduced == pytest.approx(math.sqrt(5 * math.pi / 24))
    assert monatomic_sound_speed() == pytest.approx(0.809, abs=1e-3)


def test_quadrupled_temperature_doubles_speed():
    g = PhysicalGasSpec.argon_stp()
    hot = PhysicalGasSpec(g.diameter, g.number_density, 4 * g.temperature, g.molar_mass)
    a, b = reduced_units(g), reduced_units(hot)
    assert b.mean_speed == pytest.approx(2 * a.mean_speed)
    assert b.mean_free_path == pytest.approx(a.mean_free_path)


def test_reduced_units_rejects_nonpositive():
    with pytest.raises(DomainError):
        reduced_units(PhysicalGasSpec(0.0, 1e25, 300.0, 0.04))


def test_empty_gas():
    s = init_gas(0, (1, 1, 1), 0)
    assert s.n_atoms == 0 and s.time == 0.0
    _, log = dsmc_step(s, 0.1)
    assert len(log) == 0


def test_init_gas_statistics():
    s = init_gas(100_000, (20, 20, 20), 3)
    speed = np.linalg.norm(s.velocities, axis=1).mean()
    assert abs(speed - 1) < 0.01
    p = np.abs(s.momentum()).max() / np.abs(s.velocities).sum()
    assert p < 1e-12


def test_single_atom_advects():
    s = init_gas(1, (10, 10, 10), 1)
    s.positions[:] = [[1.0, 2.0, 3.0]]
    s.velocities[:] = [[0.5, -0.25, 1.0]]
    dsmc_step(s, 0.2)
    assert np.allclose(s.positions, [[1.1, 1.95, 3.2]])


def test_bad_dt():
    with pytest.raises(DomainError):
        dsmc_step(init_gas(10, (1, 1, 1), 0), 0.0)


def test_conservation_and_monotone_tags():
    s = init_gas(5000, (5, 5, 5), 11)
    seed_track(s, Slab(0, 1))
    e0, p0 = s.kinetic_energy(), s.momentum().copy()
    connected = [s.n_connected()]
    for _ in range(30):
        _, log = dsmc_step(s, 0.1)
        connected.append(s.n_connected())
        # later collisions in the same step can only add connections
        assert np.all(s.tags[log.first] >= log.after)
        assert np.all(s.tags[log.second] >= log.after)
    assert s.n_atoms == 5000
    assert abs(s.kinetic_energy() - e0) / e0 < 1e-10
    assert np.allclose(s.momentum(), p0, atol=1e-9)
    assert all(b >= a for a, b in zip(connected, connected[1:]))


def test_collision_log_events():
    s = init_gas(2000, (3, 3, 3), 2)
    s.tags[:1000] = 1
    _, log = dsmc_step(s, 0.1)
    assert len(log) > 0
    for ev in log:
        merged = ev.tags_before[0] | ev.tags_before[1]
        assert ev.tags_after == (merged, merged)
        assert ev.time == pytest.approx(s.time)


def test_calibration_rate_and_path():
    s = init_gas(20_000, (8, 8, 8), 4)
    collisions = 0
    for _ in range(100):
        _, log = dsmc_step(s, 0.1)
        collisions += len(log)
    rate = 2 * collisions / (20_000 * 10.0)
    speed = np.linalg.norm(s.velocities, axis=1).mean()
    assert rate == pytest.approx(1.0, rel=0.05)
    assert speed / rate == pytest.approx(1.0, rel=0.05)


def test_trajectory_deterministic():
    def run():
        s = init_gas(3000, (4, 4, 4), 99)
        seed_track(s, Slab(0, 0.5))
        for _ in range(10):
            dsmc_step(s, 0.1)
        return s
    a, b = run(), run()
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.velocities, b.velocities)
    assert np.array_equal(a.tags, b.tags)


def test_seed_regions():
    s = init_gas(20_000, (10, 2, 2), 8)
    seed_track(s, Slab(20, 30))
    assert s.n_connected() == 0
    seed_track(s, Slab(0, 1))
    n, p = 20_000, 0.1
    assert abs(s.n_connected() - n * p) < 3 * math.sqrt(n * p * (1 - p))
    seed_track(s, Slab(0, 10))
    snap = coarse_grain(s, GridSpec(10))
    assert np.all(snap.f1 == 1.0) and np.all(snap.f0 + snap.f1 == 1.0)


def test_track_segment():
    s = init_gas(10_000, (10, 10, 10), 5)
    seed_track(s, TrackSegment((0, 5, 5), (10, 5, 5), 1.0))
    d = np.hypot(s.positions[:, 1] - 5, s.positions[:, 2] - 5)
    assert np.array_equal(s.tags.astype(bool), d <= 1.0)


def test_coarse_grain_empty_bins_and_zero_tags():
    s = init_gas(200, (10, 1, 1), 0)
    snap = coarse_grain(s, GridSpec(5))
    assert np.all(snap.f1 == 0.0)
    assert snap.counts.sum() == 200
    snap = coarse_grain(s, GridSpec(4, lo=20.0, hi=24.0))
    assert np.all(np.isnan(snap.f1))


def test_contagion_without_seed_stays_zero():
    s = init_gas(2000, (10, 3, 3), 1)
    run = run_contagion(s, 2.0, GridSpec(10), 0.5)
    assert np.all(run.history.as_array() == 0.0)
    s = init_gas(2000, (10, 3, 3), 1)
    s.tags[:] = 1
    run = run_contagion(s, 2.0, GridSpec(10), 0.5)
    assert np.all(run.history.as_array() == 1.0)
    assert run.history.times == pytest.approx([0.0, 0.5, 1.0, 1.5, 2.0])


def test_oracle_examples():
    t = component_oracle(2, "10", [(0, 1)])
    assert t.entries == {(1, 1): 1.0}
    t = component_oracle(3, "000", [(0, 1), (1, 2), (0, 2)])
    assert t.entries == {(0, 0, 0): 1.0}
    assert t.norm() == pytest.approx(1.0)


def test_oracle_cap_and_bad_pairs():
    with pytest.raises(CapacityError):
        component_oracle(13, "0" * 13, [])
    with pytest.raises(DomainError):
        component_oracle(3, "100", [(0, 0)])
    with pytest.raises(DomainError):
        component_oracle(3, "10", [])


@st.composite
def oracle_cases(draw):
    n = draw(st.integers(2, 10))
    bits = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    pair = st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda p: p[0] != p[1])
    seq = draw(st.lists(pair, max_size=40))
    return n, bits, seq


@given(oracle_cases())
def test_oracle_matches_fold(case):
    n, bits, seq = case
    table = component_oracle(n, bits, seq)
    assert np.array_equal(table.marginals(), fold_tags(bits, seq))
    assert len(table.entries) == 1
