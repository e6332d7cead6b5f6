"""Stochastic collapse of channel probabilities.

The probability vector diffuses on the simplex with increments

    dp_i = sqrt(K) * (sqrt(p_i) dW_i - p_i * sum_j sqrt(p_j) dW_j)

whose covariance is K p_i (delta_ij - p_j) dt, i.e. K p1 p2 dt with opposite
signs for two channels.  The process is a martingale and ends at a vertex:
channel i wins with probability p_i(0).

Replicas draw their Gaussian increments in fixed-size chunks from their own
generator, so a replica run inside an ensemble is bit-identical to the same
replica run alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, NonTerminationError, StateError
from .seeding import derive_seed, make_rng

SIMPLEX_TOL = 1e-12
CHUNK = 512


@dataclass
class ChannelAmplitudes:
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)


@dataclass
class ChannelSimplex:
    p: np.ndarray
    warning: Optional[str] = None

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        check_simplex(self.p)

    def __len__(self) -> int:
        return len(self.p)


def check_simplex(p: np.ndarray) -> None:
    if p.ndim != 1 or len(p) < 1:
        raise StateError("a simplex point is a non-empty vector")
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise StateError(f"probabilities must lie in [0, 1]: {p!r}")
    if abs(float(p.sum()) - 1.0) > SIMPLEX_TOL * max(1, len(p)):
        raise StateError(f"probabilities must sum to 1, got {p.sum()!r}")


@dataclass(frozen=True)
class CollapseParams:
    K: float
    dt: float
    epsilon: float = 1e-6

    def __post_init__(self):
        if not self.K >= 0:
            raise DomainError(f"K must be non-negative, got {self.K!r}")
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt!r}")
        if not 0 < self.epsilon < 1e-3:
            raise DomainError(f"epsilon must lie in (0, 1e-3), got {self.epsilon!r}")


@dataclass
class CollapseOutcome:
    winner: int
    absorption_time: float
    trajectory: Optional[np.ndarray] = None  # rows: t, p_1..p_M


def probs_from_amplitudes(c: ChannelAmplitudes | Sequence[complex]) -> ChannelSimplex:
    amps = c.amplitudes if isinstance(c, ChannelAmplitudes) else np.asarray(c, dtype=complex)
    w = np.abs(amps) ** 2
    total = float(w.sum())
    if total == 0.0:
        raise DomainError("all channel amplitudes are zero")
    note = None
    if abs(total - 1.0) > 1e-6:
        note = f"amplitudes had squared norm {total:.9g}; renormalised"
    p = w / total
    p /= p.sum()
    return ChannelSimplex(p, note)


def _project(P: np.ndarray) -> np.ndarray:
    np.maximum(P, 0.0, out=P)
    P /= P.sum(axis=-1, keepdims=True)
    return P


def _increment(P: np.ndarray, K: float, W: np.ndarray) -> np.ndarray:
    s = np.sqrt(P)
    common = np.sum(s * W, axis=-1, keepdims=True)
    return math.sqrt(K) * (s * W - P * common)


def pearle_step(p: ChannelSimplex, params: CollapseParams, rng: np.random.Generator) -> ChannelSimplex:
    P = np.asarray(p.p, dtype=float)
    check_simplex(P)
    W = rng.standard_normal(len(P)) * math.sqrt(params.dt)
    new = _project(P + _increment(P, params.K, W))
    return ChannelSimplex(new)


def _freeze(P: np.ndarray, eps: float) -> None:
    P[P <= eps] = 0.0
    P /= P.sum(axis=-1, keepdims=True)


def _absorbed(P: np.ndarray, eps: float) -> np.ndarray:
    return P.max(axis=-1) >= 1.0 - eps


@dataclass
class _BatchResult:
    winners: np.ndarray
    times: np.ndarray
    mean_path: Optional[np.ndarray]  # rows: t, mean p_1..p_M
    mean_sq: Optional[np.ndarray]  # rows: t, mean p_1^2..p_M^2
    trajectories: Optional[list]


def _run_batch(P0: np.ndarray, params: CollapseParams, rngs: list, record_every: int = 0,
               keep_paths: bool = False, max_time: Optional[float] = None) -> _BatchResult:
    if params.K == 0:
        raise NonTerminationError("K = 0 never absorbs")
    n, M = P0.shape
    eps, dt = params.epsilon, params.dt
    max_steps = int(math.ceil((max_time if max_time is not None else 1000.0 / params.K) / dt))
    sq = math.sqrt(dt)
    root_k = math.sqrt(params.K)

    winners = np.full(n, -1, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)
    P = P0.astype(float).copy()
    _freeze(P, eps)
    live = np.flatnonzero(~_absorbed(P, eps))
    done0 = np.setdiff1d(np.arange(n), live)
    winners[done0] = np.argmax(P[done0], axis=1)
    settled = np.zeros(M)
    np.add.at(settled, winners[done0], 1.0)

    paths = [[(0.0, *P[i])] for i in range(n)] if keep_paths else None
    means = [(0.0, *(P.sum(axis=0) / n))] if record_every else None
    squares = [(0.0, *((P * P).sum(axis=0) / n))] if record_every else None
    P = P[live]
    running = np.ones(len(live), dtype=bool)
    noise = np.empty((0, CHUNK, M))
    k = 0
    while running.any():
        if k % CHUNK == 0:
            # finished rows are dropped only when the noise block is refilled
            live, P = live[running], P[running]
            running = np.ones(len(live), dtype=bool)
            noise = np.stack([rngs[i].standard_normal((CHUNK, M)) for i in live]) * sq
        k += 1
        if k > max_steps:
            raise StateError(f"{int(running.sum())} replicas not absorbed after {max_steps} steps")
        W = noise[:, (k - 1) % CHUNK, :]
        s = np.sqrt(P)
        sw = s * W
        P += root_k * (sw - P * sw.sum(axis=1, keepdims=True))
        # clamps negatives and freezes channels at <= eps in one pass
        P[P <= eps] = 0.0
        P /= P.sum(axis=1, keepdims=True)
        hit = P.max(axis=1) >= 1.0 - eps
        hit &= running
        if keep_paths:
            for r in np.flatnonzero(running):
                paths[live[r]].append((k * dt, *P[r]))
        if hit.any():
            idx = live[hit]
            winners[idx] = np.argmax(P[hit], axis=1)
            steps[idx] = k
            np.add.at(settled, winners[idx], 1.0)
            running &= ~hit
            # zero noise keeps a finished row on its vertex until compaction
            noise[hit] = 0.0
        if record_every and k % record_every == 0:
            # a vertex squares to itself, so settled rows count once in both
            rest = P[running]
            means.append((k * dt, *((settled + rest.sum(axis=0)) / n)))
            squares.append((k * dt, *((settled + (rest * rest).sum(axis=0)) / n)))
    return _BatchResult(winners, steps * dt,
                        np.array(means) if record_every else None,
                        np.array(squares) if record_every else None,
                        [np.array(p) for p in paths] if keep_paths else None)


def run_to_absorption(p0: ChannelSimplex, params: CollapseParams, rng: np.random.Generator,
                      keep_trajectory: bool = False, max_time: Optional[float] = None) -> CollapseOutcome:
    """Step until one channel holds at least ``1 - epsilon``.

    Channels that fall to ``epsilon`` or below are frozen at zero and the
    rest renormalised.  ``max_time`` defaults to ``1000 / K``.
    """
    if params.K == 0:
        raise NonTerminationError("K = 0: probabilities never fluctuate")
    res = _run_batch(np.atleast_2d(p0.p), params, [rng], keep_paths=keep_trajectory, max_time=max_time)
    traj = res.trajectories[0] if keep_trajectory else None
    return CollapseOutcome(int(res.winners[0]), float(res.times[0]), traj)


@dataclass
class BornResult:
    p0: np.ndarray
    frequencies: np.ndarray
    stderr: np.ndarray
    winners: np.ndarray
    absorption_times: np.ndarray
    seeds: np.ndarray
    mean_path: Optional[np.ndarray] = None  # rows: t, mean p_1..p_M
    path_stderr: Optional[np.ndarray] = None  # rows: t, stderr of each mean

    @property
    def ci_3sigma(self) -> np.ndarray:
        return np.column_stack((self.frequencies - 3 * self.stderr, self.frequencies + 3 * self.stderr))

    def mean_time(self) -> tuple[float, float]:
        t = self.absorption_times
        return float(t.mean()), float(t.std(ddof=1) / math.sqrt(len(t))) if len(t) > 1 else 0.0


def replica_seeds(seed: int, n_runs: int) -> np.ndarray:
    return np.array([derive_seed(seed, i) for i in range(n_runs)], dtype=np.uint64)


def born_ensemble(p0: ChannelSimplex, params: CollapseParams, n_runs: int, seed: int,
                  record_every: int = 0, min_runs: int = 100) -> BornResult:
    """Winner frequencies over ``n_runs`` independent replicas.

    Replica ``i`` uses the generator seeded by ``derive_seed(seed, i)``.
    ``record_every`` > 0 also records the ensemble mean of p (absorbed
    replicas counted at their vertex) and its standard error every that
    many steps.
    """
    if n_runs < min_runs:
        raise DomainError(f"n_runs must be at least {min_runs}, got {n_runs}")
    seeds = replica_seeds(seed, n_runs)
    rngs = [make_rng(int(s)) for s in seeds]
    P0 = np.tile(p0.p, (n_runs, 1))
    res = _run_batch(P0, params, rngs, record_every=record_every)
    M = len(p0.p)
    counts = np.bincount(res.winners, minlength=M).astype(float)
    freq = counts / n_runs
    stderr = np.sqrt(freq * (1 - freq) / n_runs)
    path_se = None
    if record_every:
        var = np.maximum(res.mean_sq[:, 1:] - res.mean_path[:, 1:] ** 2, 0.0) * n_runs / (n_runs - 1)
        path_se = np.column_stack((res.mean_path[:, 0], np.sqrt(var / n_runs)))
    return BornResult(np.asarray(p0.p), freq, stderr, res.winners, res.times, seeds,
                      res.mean_path, path_se)


def mean_absorption_theory(p, K: float) -> float:
    """Mean time for one channel to take all the probability.

    ``p`` is channel 1's probability of a two-channel split, or a full
    probability vector; the general result is -(2/K) sum (1-p_i) ln(1-p_i),
    which for two channels is -(2/K) (p ln p + (1-p) ln(1-p)).
    """
    if not K > 0:
        raise DomainError(f"K must be positive, got {K!r}")
    vec = np.atleast_1d(np.asarray(p, dtype=float))
    if vec.size == 1:
        x = float(vec[0])
        if not 0.0 <= x <= 1.0:
            raise DomainError(f"p must lie in [0, 1], got {x!r}")
        if x in (0.0, 1.0):
            return 0.0
        return -(2.0 / K) * (x * math.log(x) + (1 - x) * math.log(1 - x))
    q = 1.0 - vec
    terms = np.where(q > 0, q * np.log(np.where(q > 0, q, 1.0)), 0.0)
    return float(-(2.0 / K) * terms.sum())


def bridge_K(nonunitary_rate: float, kappa: float = 1.0) -> float:
    """Collapse rate from a measured rate of non-unitary collisions."""
    if nonunitary_rate < 0 or kappa < 0:
        raise DomainError("rate and kappa must be non-negative")
    return kappa * nonunitary_rate
