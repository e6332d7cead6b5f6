import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from entwave.collapse import (ChannelAmplitudes, ChannelSimplex, CollapseParams, born_ensemble,
                              bridge_K, mean_absorption_theory, pearle_step, probs_from_amplitudes,
                              run_to_absorption)
from entwave.errors import DomainError, NonTerminationError, StateError
from entwave.seeding import derive_seed, make_rng


@pytest.mark.parametrize("c,p", [((1, 0), (1, 0)), ((1 / math.sqrt(2), 1j / math.sqrt(2)), (0.5, 0.5)),
                                 ((0.6, 0.8j), (0.36, 0.64))])
def test_probs_from_amplitudes(c, p):
    out = probs_from_amplitudes(ChannelAmplitudes(c))
    assert np.allclose(out.p, p)
    assert out.warning is None


def test_unnormalised_amplitudes_warn():
    out = probs_from_amplitudes([1.0, 1.0])
    assert np.allclose(out.p, [0.5, 0.5]) and out.warning
    with pytest.raises(DomainError):
        probs_from_amplitudes([0, 0])


def test_simplex_validation():
    with pytest.raises(StateError):
        ChannelSimplex([0.6, 0.6])
    with pytest.raises(DomainError):
        CollapseParams(1.0, 1e-3, epsilon=0.01)


simplex = st.lists(st.floats(0.001, 1.0), min_size=2, max_size=6).map(
    lambda w: list(np.asarray(w) / np.sum(w)))


@given(simplex, st.floats(0.1, 20.0), st.integers(0, 2**32))
def test_step_preserves_simplex(p, K, seed):
    rng = make_rng(seed)
    q = ChannelSimplex(p)
    for _ in range(50):
        q = pearle_step(q, CollapseParams(K, 1e-3 / K), rng)
        assert abs(q.p.sum() - 1) <= 1e-12
        assert np.all((q.p >= 0) & (q.p <= 1))


def test_vertex_and_zero_K_fixed():
    rng = make_rng(0)
    assert np.array_equal(pearle_step(ChannelSimplex([1, 0]), CollapseParams(1, 1e-3), rng).p, [1, 0])
    p = ChannelSimplex([0.3, 0.7])
    assert np.allclose(pearle_step(p, CollapseParams(0, 1e-3), rng).p, p.p)


def test_two_channel_variance():
    rng = make_rng(1)
    p = ChannelSimplex([0.5, 0.5])
    d = np.array([pearle_step(p, CollapseParams(1, 1e-3), rng).p - 0.5 for _ in range(100_000)])
    var = d[:, 0].var(ddof=1)
    cov = np.mean((d[:, 0] - d[:, 0].mean()) * (d[:, 1] - d[:, 1].mean()))
    se = (d[:, 0] ** 2).std(ddof=1) / math.sqrt(len(d))
    assert abs(var - 2.5e-4) < 3 * se
    assert abs(cov + 2.5e-4) < 3 * se
    assert np.allclose(d.sum(axis=1), 0, atol=1e-15)


def test_absorption_edge_cases():
    out = run_to_absorption(ChannelSimplex([1, 0]), CollapseParams(1, 1e-4), make_rng(0))
    assert out.winner == 0 and out.absorption_time == 0.0
    with pytest.raises(NonTerminationError):
        run_to_absorption(ChannelSimplex([0.5, 0.5]), CollapseParams(0, 1e-4), make_rng(0))
    with pytest.raises(StateError):
        run_to_absorption(ChannelSimplex([0.5, 0.5]), CollapseParams(1, 1e-4), make_rng(0),
                          max_time=1e-3)


def test_trajectory_recorded():
    out = run_to_absorption(ChannelSimplex([0.4, 0.6]), CollapseParams(1, 1e-3), make_rng(5),
                            keep_trajectory=True)
    traj = out.trajectory
    assert traj[0, 0] == 0.0 and traj[-1, 0] == pytest.approx(out.absorption_time)
    assert traj[-1, 1 + out.winner] >= 1 - 1e-6


def test_single_run_matches_ensemble_replica():
    params = CollapseParams(1.0, 1e-3)
    p = ChannelSimplex([0.2, 0.3, 0.5])
    ens = born_ensemble(p, params, 200, 9)
    for i in (0, 3, 77):
        one = run_to_absorption(p, params, make_rng(derive_seed(9, i)))
        assert one.winner == ens.winners[i]
        assert one.absorption_time == ens.absorption_times[i]


def test_born_trivial_and_min_runs():
    r = born_ensemble(ChannelSimplex([1, 0]), CollapseParams(1, 1e-3), 100, 0)
    assert np.array_equal(r.frequencies, [1.0, 0.0])
    with pytest.raises(DomainError):
        born_ensemble(ChannelSimplex([0.5, 0.5]), CollapseParams(1, 1e-3), 99, 0)


def test_martingale_and_termination():
    p0 = [0.3, 0.7]
    r = born_ensemble(ChannelSimplex(p0), CollapseParams(1, 1e-3), 4000, 12, record_every=25)
    gap = np.abs(r.mean_path[:, 1:] - p0)
    assert np.all(gap <= 3 * r.path_stderr[:, 1:] + 1e-12)
    assert r.absorption_times.max() <= 50 * mean_absorption_theory(0.3, 1.0)
    lo, hi = r.ci_3sigma[0]
    assert lo <= 0.3 <= hi


def test_dt_halving_shift_below_stderr():
    p = ChannelSimplex([0.3, 0.7])
    a = born_ensemble(p, CollapseParams(1, 2e-3), 2000, 4)
    b = born_ensemble(p, CollapseParams(1, 1e-3), 2000, 4)
    assert abs(a.frequencies[0] - b.frequencies[0]) < a.stderr[0]


def test_mean_time_theory():
    assert mean_absorption_theory(0.5, 1) == pytest.approx(2 * math.log(2))
    assert mean_absorption_theory(0.5, 2) == pytest.approx(math.log(2))
    assert mean_absorption_theory(0.0, 1) == 0.0 and mean_absorption_theory(1.0, 3) == 0.0
    assert mean_absorption_theory(1e-9, 1) < 1e-7
    assert mean_absorption_theory([0.3, 0.7], 1) == pytest.approx(mean_absorption_theory(0.3, 1))
    with pytest.raises(DomainError):
        mean_absorption_theory(0.5, 0)


@given(st.floats(0.01, 0.99))
def test_mean_time_solves_boundary_problem(p):
    # (K/2) p (1-p) T'' = -1 checked by central differences
    h = 1e-4
    T = lambda x: mean_absorption_theory(x, 1.0)
    second = (T(p + h) - 2 * T(p) + T(p - h)) / h**2 if h < p < 1 - h else -2 / (p * (1 - p))
    assert 0.5 * p * (1 - p) * second == pytest.approx(-1.0, rel=1e-3)


def test_bridge_K():
    assert bridge_K(0.0, 1.0) == 0.0
    assert bridge_K(0.7, 1.0) == 0.7
    assert bridge_K(0.7, 2.0) == pytest.approx(1.4)
    with pytest.raises(DomainError):
        bridge_K(-1.0)
