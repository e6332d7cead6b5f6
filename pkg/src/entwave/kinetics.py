"""Particle-level gas with contagious connectedness tags.

Reduced units throughout: mean free path = 1, mean thermal speed = 1, so the
mean free time is 1 as well.  Collisions are sampled with a cell-based
stochastic (DSMC-style) scheme for hard spheres whose cross-section is fixed
from the number density so that the equilibrium collision rate is one per
atom per unit time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .continuum import FieldHistory
from .errors import CapacityError, DomainError
from .seeding import make_rng

BOLTZMANN = 1.380649e-23
AVOGADRO = 6.02214076e23

# one-dimensional velocity spread giving a mean speed of exactly 1
THERMAL_SIGMA = math.sqrt(math.pi / 8.0)
CELL_SIZE = 0.5
ORACLE_CAP = 12


class ConnectTag(IntEnum):
    DISCONNECTED = 0
    CONNECTED = 1


def or_rule(a: int, b: int) -> tuple[ConnectTag, ConnectTag]:
    """Tags of two atoms after they interact: connectedness is contagious."""
    t = ConnectTag(int(a) | int(b))
    return t, t


# --------------------------------------------------------------------------
# units


@dataclass(frozen=True)
class PhysicalGasSpec:
    diameter: float  # m
    number_density: float  # m^-3
    temperature: float  # K
    molar_mass: float  # kg/mol
    gamma: float = 5.0 / 3.0

    @classmethod
    def argon_stp(cls) -> "PhysicalGasSpec":
        return cls(diameter=3.64e-10, number_density=2.69e25,
                   temperature=273.15, molar_mass=39.948e-3)


@dataclass(frozen=True)
class UnitScales:
    mean_free_path: float  # m
    mean_free_time: float  # s
    mean_speed: float  # m/s
    sound_speed_reduced: float


def reduced_units(gas: PhysicalGasSpec) -> UnitScales:
    for name in ("diameter", "number_density", "temperature", "molar_mass", "gamma"):
        value = getattr(gas, name)
        if not value > 0:
            raise DomainError(f"{name} must be positive, got {value!r}")
    m = gas.molar_mass / AVOGADRO
    kT = BOLTZMANN * gas.temperature
    mfp = 1.0 / (math.sqrt(2.0) * math.pi * gas.diameter**2 * gas.number_density)
    v_mean = math.sqrt(8.0 * kT / (math.pi * m))
    c_s = math.sqrt(gas.gamma * kT / m)
    return UnitScales(mean_free_path=mfp, mean_free_time=mfp / v_mean,
                      mean_speed=v_mean, sound_speed_reduced=c_s / v_mean)


def monatomic_sound_speed() -> float:
    """Reduced sound speed of an ideal monatomic gas, sqrt(5*pi/24)."""
    return math.sqrt(5.0 * math.pi / 24.0)


# --------------------------------------------------------------------------
# gas state


@dataclass
class Atom:
    position: np.ndarray
    velocity: np.ndarray
    tag: ConnectTag
    env_tags: tuple = ()


@dataclass
class GasState:
    """Struct-of-arrays gas.  ``tags`` is a uint8 array of ConnectTag values."""

    positions: np.ndarray
    velocities: np.ndarray
    tags: np.ndarray
    box: np.ndarray
    rng: np.random.Generator
    time: float = 0.0
    cross_section: float = 0.0
    env_tags: Optional[list] = None
    last_partner: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.last_partner is None:
            self.last_partner = np.full(len(self.tags), -1, dtype=np.int64)

    @property
    def n_atoms(self) -> int:
        return len(self.tags)

    @property
    def volume(self) -> float:
        return float(np.prod(self.box))

    def atom(self, i: int) -> Atom:
        env = tuple(self.env_tags[i]) if self.env_tags is not None else ()
        return Atom(self.positions[i].copy(), self.velocities[i].copy(),
                    ConnectTag(int(self.tags[i])), env)

    def kinetic_energy(self) -> float:
        return 0.5 * float(np.sum(self.velocities**2))

    def momentum(self) -> np.ndarray:
        return self.velocities.sum(axis=0)

    def n_connected(self) -> int:
        return int(np.count_nonzero(self.tags))


def _as_box(box) -> np.ndarray:
    b = np.asarray(box, dtype=float).reshape(-1)
    if b.shape != (3,):
        raise DomainError(f"box must have three lengths, got {box!r}")
    if not np.all(b > 0) or not np.all(np.isfinite(b)):
        raise DomainError(f"box lengths must be positive and finite, got {box!r}")
    return b


def init_gas(n_atoms: int, box, seed_or_rng) -> GasState:
    """Uniform positions, Maxwellian velocities (mean speed 1), zero net momentum."""
    if n_atoms < 0:
        raise DomainError("n_atoms must be non-negative")
    b = _as_box(box)
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else make_rng(seed_or_rng)
    pos = rng.random((n_atoms, 3)) * b
    vel = rng.normal(0.0, THERMAL_SIGMA, size=(n_atoms, 3))
    if n_atoms > 0:
        vel -= vel.mean(axis=0)
    density = n_atoms / float(np.prod(b))
    sigma = 1.0 / (math.sqrt(2.0) * density) if n_atoms > 0 else 0.0
    return GasState(positions=pos, velocities=vel, tags=np.zeros(n_atoms, dtype=np.uint8),
                    box=b, rng=rng, time=0.0, cross_section=sigma)


# --------------------------------------------------------------------------
# collisions


@dataclass(frozen=True)
class CollisionEvent:
    time: float
    partners: tuple[int, int]
    tags_before: tuple[ConnectTag, ConnectTag]
    tags_after: tuple[ConnectTag, ConnectTag]


@dataclass
class CollisionLog:
    """Collisions of one step in execution order, as parallel arrays."""

    time: float
    first: np.ndarray
    second: np.ndarray
    before_first: np.ndarray
    before_second: np.ndarray

    @classmethod
    def empty(cls, time: float) -> "CollisionLog":
        z = np.zeros(0, dtype=np.int64)
        u = np.zeros(0, dtype=np.uint8)
        return cls(time, z, z.copy(), u, u.copy())

    @property
    def after(self) -> np.ndarray:
        return self.before_first | self.before_second

    def __len__(self) -> int:
        return len(self.first)

    def __iter__(self) -> Iterator[CollisionEvent]:
        for a, b, ta, tb in zip(self.first.tolist(), self.second.tolist(),
                                self.before_first.tolist(), self.before_second.tolist()):
            yield CollisionEvent(self.time, (a, b), (ConnectTag(ta), ConnectTag(tb)),
                                 or_rule(ta, tb))


def _cell_index(positions: np.ndarray, box: np.ndarray, cell_size: float):
    ncell = np.maximum(1, np.rint(box / cell_size)).astype(np.int64)
    ijk = np.floor(positions / (box / ncell)).astype(np.int64)
    np.clip(ijk, 0, ncell - 1, out=ijk)
    flat = (ijk[:, 0] * ncell[1] + ijk[:, 1]) * ncell[2] + ijk[:, 2]
    return flat, int(np.prod(ncell)), float(np.prod(box / ncell))


def _ready_mask(a: np.ndarray, b: np.ndarray, n_atoms: int) -> np.ndarray:
    # a pair may run once no earlier pending pair touches either partner
    k = len(a)
    order = np.arange(k)
    first = np.full(n_atoms, k, dtype=np.int64)
    np.minimum.at(first, a, order)
    np.minimum.at(first, b, order)
    return (first[a] == order) & (first[b] == order)


def _scatter(state: GasState, a: np.ndarray, b: np.ndarray) -> None:
    v = state.velocities
    va, vb = v[a], v[b]
    vcm = 0.5 * (va + vb)
    g = np.linalg.norm(va - vb, axis=1)
    cos_t = 2.0 * state.rng.random(len(a)) - 1.0
    sin_t = np.sqrt(1.0 - cos_t**2)
    phi = 2.0 * math.pi * state.rng.random(len(a))
    rel = g[:, None] * np.column_stack((sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t))
    v[a] = vcm + 0.5 * rel
    v[b] = vcm - 0.5 * rel


def dsmc_step(state: GasState, dt: float, cell_size: float = CELL_SIZE) -> tuple[GasState, CollisionLog]:
    """Advance the gas in place by ``dt``: free flight, then binary collisions.

    Candidate pairs are drawn inside each cell with the no-time-counter rule
    and accepted with probability g / g_max; an atom is not paired again
    with the partner of its previous collision while its cell offers another
    choice.  Accepted pairs sharing an atom are executed in list order, so the
    result equals sequential processing.
    """
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt!r}")
    rng = state.rng
    n = state.n_atoms
    state.time += dt
    if n == 0:
        return state, CollisionLog.empty(state.time)

    pos = state.positions
    pos += state.velocities * dt
    np.mod(pos, state.box, out=pos)
    pos[pos >= state.box] = 0.0
    if n < 2:
        return state, CollisionLog.empty(state.time)

    cell, ncells, vcell = _cell_index(pos, state.box, cell_size)
    order = np.argsort(cell, kind="stable")
    counts = np.bincount(cell, minlength=ncells)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))

    g_max = 2.0 * float(np.sqrt(np.max(np.einsum("ij,ij->i", state.velocities, state.velocities))))
    occupied = np.flatnonzero(counts >= 2)
    nc = counts[occupied].astype(float)
    expected = 0.5 * nc * (nc - 1.0) * state.cross_section * g_max * dt / vcell
    n_cand = np.floor(expected + rng.random(len(occupied))).astype(np.int64)
    total = int(n_cand.sum())
    if total == 0 or g_max == 0.0:
        return state, CollisionLog.empty(state.time)

    c_n = np.repeat(counts[occupied], n_cand)
    c_start = np.repeat(starts[occupied], n_cand)
    li = np.floor(rng.random(total) * c_n).astype(np.int64)
    lj = (li + 1 + np.floor(rng.random(total) * (c_n - 1)).astype(np.int64)) % c_n
    a = order[c_start + li]
    b = order[c_start + lj]

    # never pick the partner of an atom's previous collision (cell-local
    # selection would otherwise recollide separating pairs); a two-atom cell
    # has no alternative and keeps its pair
    last = state.last_partner
    r = np.flatnonzero((last[a] == b) & (c_n >= 3))
    if len(r):
        slot = np.empty(n, dtype=np.int64)
        slot[order] = np.arange(n)
        lf = slot[b[r]] - c_start[r]
        lo = np.minimum(li[r], lf)
        hi = np.maximum(li[r], lf)
        k = np.floor(rng.random(len(r)) * (c_n[r] - 2)).astype(np.int64)
        k += k >= lo
        k += k >= hi
        b[r] = order[c_start[r] + k]
    g = np.linalg.norm(state.velocities[a] - state.velocities[b], axis=1)
    keep = rng.random(total) * g_max < g
    a, b = a[keep], b[keep]
    # a pair drawn twice in one step collides once
    _, first_seen = np.unique(np.minimum(a, b) * n + np.maximum(a, b), return_index=True)
    first_seen.sort()
    a, b = a[first_seen], b[first_seen]
    if len(a) == 0:
        return state, CollisionLog.empty(state.time)

    done_a, done_b, tag_a, tag_b = [], [], [], []
    tags = state.tags
    while len(a):
        ready = _ready_mask(a, b, n)
        ra, rb = a[ready], b[ready]
        last[ra] = rb
        last[rb] = ra
        ta, tb = tags[ra].copy(), tags[rb].copy()
        _scatter(state, ra, rb)
        merged = ta | tb
        tags[ra] = merged
        tags[rb] = merged
        done_a.append(ra)
        done_b.append(rb)
        tag_a.append(ta)
        tag_b.append(tb)
        a, b = a[~ready], b[~ready]

    log = CollisionLog(state.time, np.concatenate(done_a), np.concatenate(done_b),
                       np.concatenate(tag_a), np.concatenate(tag_b))
    return state, log


# --------------------------------------------------------------------------
# seeding regions


@dataclass(frozen=True)
class Slab:
    """Atoms with ``lo <= position[axis] <= hi``."""

    lo: float
    hi: float
    axis: int = 0

    def contains(self, positions: np.ndarray) -> np.ndarray:
        x = positions[:, self.axis]
        return (x >= self.lo) & (x <= self.hi)


@dataclass(frozen=True)
class TrackSegment:
    """Atoms within ``radius`` of the straight track from ``start`` to ``end``."""

    start: tuple[float, float, float]
    end: tuple[float, float, float]
    radius: float

    def contains(self, positions: np.ndarray) -> np.ndarray:
        p0 = np.asarray(self.start, dtype=float)
        d = np.asarray(self.end, dtype=float) - p0
        dd = float(d @ d)
        rel = positions - p0
        s = np.zeros(len(positions)) if dd == 0.0 else np.clip(rel @ d / dd, 0.0, 1.0)
        dist2 = np.sum((rel - s[:, None] * d) ** 2, axis=1)
        return dist2 <= self.radius**2


def seed_track(state: GasState, region) -> GasState:
    state.tags[region.contains(state.positions)] = ConnectTag.CONNECTED
    return state


# --------------------------------------------------------------------------
# coarse graining


@dataclass(frozen=True)
class GridSpec:
    """Equal-width bins along one axis; ``hi=None`` means the box length."""

    n_bins: int
    axis: int = 0
    lo: float = 0.0
    hi: Optional[float] = None

    def edges(self, box: np.ndarray) -> np.ndarray:
        hi = float(box[self.axis]) if self.hi is None else self.hi
        return np.linspace(self.lo, hi, self.n_bins + 1)


@dataclass
class FieldSnapshot:
    time: float
    x: np.ndarray
    f1: np.ndarray  # NaN marks an empty bin
    counts: np.ndarray

    @property
    def f0(self) -> np.ndarray:
        return 1.0 - self.f1


def coarse_grain(state: GasState, grid: GridSpec) -> FieldSnapshot:
    edges = grid.edges(state.box)
    x = state.positions[:, grid.axis]
    idx = np.searchsorted(edges, x, side="right") - 1
    idx[x == edges[-1]] = grid.n_bins - 1
    inside = (idx >= 0) & (idx < grid.n_bins)
    counts = np.bincount(idx[inside], minlength=grid.n_bins)
    connected = np.bincount(idx[inside], weights=state.tags[inside].astype(float),
                            minlength=grid.n_bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        f1 = np.where(counts > 0, connected / np.maximum(counts, 1), np.nan)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return FieldSnapshot(state.time, centers, f1, counts)


# --------------------------------------------------------------------------
# contagion runs


@dataclass
class ContagionRun:
    history: FieldHistory
    connected_counts: list[int] = field(default_factory=list)
    collisions: int = 0


def run_contagion(state: GasState, t_max: float, grid: GridSpec, record_interval: float,
                  dt: float = 0.1,
                  on_step: Optional[Callable[[GasState, CollisionLog], None]] = None) -> ContagionRun:
    """Step the gas to ``t_max`` recording a coarse-grained f1 every ``record_interval``."""
    if not t_max > 0:
        raise DomainError(f"t_max must be positive, got {t_max!r}")
    if not record_interval > 0:
        raise DomainError("record_interval must be positive")
    n_steps = int(round(t_max / dt))
    every = max(1, int(round(record_interval / dt)))
    snap = coarse_grain(state, grid)
    history = FieldHistory(snap.x, allow_missing=True)
    history.append(state.time, snap.f1)
    run = ContagionRun(history, [state.n_connected()])
    t0 = state.time
    for step in range(1, n_steps + 1):
        _, log = dsmc_step(state, dt)
        state.time = t0 + step * dt  # no drift from repeated addition
        run.collisions += len(log)
        if on_step is not None:
            on_step(state, log)
        if step % every == 0 or step == n_steps:
            history.append(state.time, coarse_grain(state, grid).f1)
            run.connected_counts.append(state.n_connected())
    return run


# --------------------------------------------------------------------------
# exact component oracle


@dataclass
class ComponentAmplitudeTable:
    """Amplitudes over connectedness configurations; key bit ``n`` is atom ``n``."""

    n_atoms: int
    entries: dict[tuple[int, ...], complex]

    def norm(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.entries.values()))

    def marginals(self) -> np.ndarray:
        out = np.zeros(self.n_atoms)
        for bits, amp in self.entries.items():
            out += abs(amp) ** 2 * np.asarray(bits, dtype=float)
        return out


def _parse_bits(initial_tags, n_atoms: int) -> list[int]:
    bits = [int(c) for c in initial_tags] if isinstance(initial_tags, str) else [int(t) for t in initial_tags]
    if len(bits) != n_atoms or any(b not in (0, 1) for b in bits):
        raise DomainError(f"initial_tags must be {n_atoms} bits, got {initial_tags!r}")
    return bits


def component_oracle(n_atoms: int, initial_tags, collisions: Sequence[tuple[int, int]],
                     cap: int = ORACLE_CAP) -> ComponentAmplitudeTable:
    """Evolve the full 2**N amplitude vector under the connectedness map.

    Each collision (n, m) sends every configuration to the one with bits n
    and m replaced by their OR, summing amplitudes that land on the same
    configuration.  Atom indices are zero-based.
    """
    if n_atoms > cap:
        raise CapacityError(f"n_atoms={n_atoms} exceeds oracle cap {cap}")
    if n_atoms < 0:
        raise DomainError("n_atoms must be non-negative")
    bits = _parse_bits(initial_tags, n_atoms)
    dim = 1 << n_atoms
    amp = np.zeros(dim, dtype=complex)
    amp[sum(b << k for k, b in enumerate(bits))] = 1.0
    configs = np.arange(dim)
    for n, m in collisions:
        if not (0 <= n < n_atoms and 0 <= m < n_atoms) or n == m:
            raise DomainError(f"invalid collision pair {(n, m)!r}")
        either = ((configs >> n) & 1) | ((configs >> m) & 1)
        target = configs | (either << n) | (either << m)
        new = np.zeros(dim, dtype=complex)
        np.add.at(new, target, amp)
        amp = new
    entries = {}
    for k in np.flatnonzero(amp):
        key = tuple((int(k) >> j) & 1 for j in range(n_atoms))
        entries[key] = complex(amp[k])
    return ComponentAmplitudeTable(n_atoms, entries)


def fold_tags(initial_tags, collisions: Sequence[tuple[int, int]]) -> list[int]:
    """Apply :func:`or_rule` to a plain tag list, one collision at a time."""
    tags = [int(c) for c in initial_tags]
    for n, m in collisions:
        tags[n], tags[m] = (int(t) for t in or_rule(tags[n], tags[m]))
    return tags
