"""Environment entanglement waves, per-atom environment tag sets and the
unitary/non-unitary collision classifier.

Each environment molecule striking the box starts a front at a boundary
point that expands at the sound speed.  An atom is entangled with molecule
``i`` once the front of ``i`` has passed it.  A front that has grown past the
pruning horizon covers the whole box; its id is then shared by every atom and
is dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError
from .kinetics import BOLTZMANN, GasState, UnitScales, dsmc_step, monatomic_sound_speed

ATOMIC_MASS = 1.66053906660e-27
FACES = ("x-", "x+", "y-", "y+", "z-", "z+")


@dataclass(frozen=True)
class EnvArrival:
    id: int
    time: float
    origin: tuple[float, float, float]
    phase: float
    face: str = ""


@dataclass(frozen=True)
class BoxBoundary:
    """Faces of an axis-aligned box ``[0, L]^3`` that receive molecules."""

    box: tuple[float, float, float]
    faces: tuple[str, ...] = FACES

    def __post_init__(self):
        bad = [f for f in self.faces if f not in FACES]
        if bad or not self.faces:
            raise DomainError(f"unknown or empty face list: {self.faces!r}")
        if not all(L > 0 for L in self.box):
            raise DomainError("box lengths must be positive")

    def face_areas(self) -> np.ndarray:
        Lx, Ly, Lz = self.box
        area = {"x": Ly * Lz, "y": Lx * Lz, "z": Lx * Ly}
        return np.array([area[f[0]] for f in self.faces])

    def sample(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, list[str]]:
        areas = self.face_areas()
        which = rng.choice(len(self.faces), size=n, p=areas / areas.sum())
        pts = rng.random((n, 3)) * np.asarray(self.box)
        for k, face in enumerate(self.faces):
            axis = "xyz".index(face[0])
            sel = which == k
            pts[sel, axis] = 0.0 if face[1] == "-" else self.box[axis]
        return pts, [self.faces[k] for k in which]


def sample_arrivals(rate: float, duration: float, boundary: BoxBoundary,
                    rng: np.random.Generator, t0: float = 0.0, first_id: int = 0) -> list[EnvArrival]:
    """Homogeneous Poisson arrivals on ``[t0, t0 + duration)``."""
    if rate < 0:
        raise DomainError(f"rate must be non-negative, got {rate!r}")
    if not duration > 0:
        raise DomainError(f"duration must be positive, got {duration!r}")
    n = int(rng.poisson(rate * duration)) if rate > 0 else 0
    if n == 0:
        return []
    times = t0 + np.sort(rng.random(n)) * duration
    origins, faces = boundary.sample(n, rng)
    phases = rng.random(n) * 2.0 * math.pi
    return [EnvArrival(first_id + k, float(times[k]), tuple(float(c) for c in origins[k]),
                       float(phases[k]), faces[k]) for k in range(n)]


# --------------------------------------------------------------------------
# wave field


@dataclass(frozen=True)
class WaveGeometry:
    """``spherical`` fronts from boundary points, or ``planar`` fronts
    parallel to the struck face (for quasi-1D boxes)."""

    box: tuple[float, float, float]
    sound_speed: float = monatomic_sound_speed()
    mode: str = "spherical"

    def __post_init__(self):
        if self.mode not in ("spherical", "planar"):
            raise DomainError(f"unknown front mode {self.mode!r}")

    @property
    def horizon(self) -> float:
        if self.mode == "spherical":
            return float(np.linalg.norm(self.box))
        return float(max(self.box))


@dataclass
class EnvWaveField:
    """Active fronts at ``time``; parallel arrays indexed like ``ids``."""

    time: float
    geometry: WaveGeometry
    ids: np.ndarray
    origins: np.ndarray
    arrival_times: np.ndarray
    phases: np.ndarray
    axes: np.ndarray  # face normal axis, used by planar fronts
    pruned: list = field(default_factory=list)

    @property
    def radii(self) -> np.ndarray:
        return self.geometry.sound_speed * (self.time - self.arrival_times)

    def __len__(self) -> int:
        return len(self.ids)

    def behind(self, positions: np.ndarray) -> np.ndarray:
        """Boolean matrix: ``[k, i]`` is True when point k is behind front i."""
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        if len(self.ids) == 0:
            return np.zeros((len(positions), 0), dtype=bool)
        if self.geometry.mode == "spherical":
            d2 = np.sum((positions[:, None, :] - self.origins[None, :, :]) ** 2, axis=2)
            return d2 <= self.radii[None, :] ** 2
        cols = np.arange(len(self.ids))
        dist = np.abs(positions[:, self.axes] - self.origins[cols, self.axes][None, :])
        return dist <= self.radii[None, :]


def _field_from(arrivals: Sequence[EnvArrival], t: float, geometry: WaveGeometry) -> EnvWaveField:
    started = [a for a in arrivals if a.time <= t]
    radius = lambda a: geometry.sound_speed * (t - a.time)
    live = [a for a in started if radius(a) <= geometry.horizon]
    dead = [a.id for a in started if radius(a) > geometry.horizon]
    return EnvWaveField(
        time=float(t), geometry=geometry,
        ids=np.array([a.id for a in live], dtype=np.int64),
        origins=np.array([a.origin for a in live], dtype=float).reshape(-1, 3),
        arrival_times=np.array([a.time for a in live], dtype=float),
        phases=np.array([a.phase for a in live], dtype=float),
        axes=np.array(["xyz".index(a.face[0]) if a.face else 0 for a in live], dtype=np.int64),
        pruned=dead)


def wave_field_at(arrivals: Sequence[EnvArrival], t: float, geometry: WaveGeometry) -> EnvWaveField:
    if t < 0:
        raise DomainError("t must be non-negative")
    return _field_from(arrivals, t, geometry)


class WaveTracker:
    """Incremental wave field for a time-stepped run.

    Arrivals are handed over in time order; fronts past the horizon are
    pruned once and never examined again.
    """

    def __init__(self, arrivals: Sequence[EnvArrival], geometry: WaveGeometry):
        self.geometry = geometry
        self._pending = sorted(arrivals, key=lambda a: (a.time, a.id))
        self._next = 0
        self._live: list[EnvArrival] = []
        self.pruned: list[int] = []

    def advance(self, t: float) -> EnvWaveField:
        while self._next < len(self._pending) and self._pending[self._next].time <= t:
            self._live.append(self._pending[self._next])
            self._next += 1
        c, h = self.geometry.sound_speed, self.geometry.horizon
        keep = []
        for a in self._live:
            if c * (t - a.time) > h:
                self.pruned.append(a.id)
            else:
                keep.append(a)
        self._live = keep
        return _field_from(self._live, t, self.geometry)


# --------------------------------------------------------------------------
# tag sets and classification


def env_tag_set(position, wave: EnvWaveField) -> tuple[int, ...]:
    """Sorted ids of the molecules whose fronts have passed ``position``."""
    mask = wave.behind(np.asarray(position, dtype=float).reshape(1, 3))[0]
    return tuple(int(i) for i in wave.ids[mask])


def attach_env_tags(state: GasState, wave: EnvWaveField) -> GasState:
    m = wave.behind(state.positions)
    state.env_tags = [tuple(int(i) for i in wave.ids[row]) for row in m]
    return state


class CollisionClass(Enum):
    UNITARY = "unitary"
    NON_UNITARY = "non-unitary"


def classify_collision(a, b) -> CollisionClass:
    return CollisionClass.UNITARY if set(a) == set(b) else CollisionClass.NON_UNITARY


# --------------------------------------------------------------------------
# unitary fraction


@dataclass
class UnitaryFractionSeries:
    window_starts: np.ndarray
    window_ends: np.ndarray
    collisions: np.ndarray
    unitary: np.ndarray
    n_atoms: int
    duration: float
    arrivals: list

    @property
    def fraction(self) -> np.ndarray:
        """Per-window unitary fraction; NaN where a window saw no collision."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.collisions > 0, self.unitary / np.maximum(self.collisions, 1), np.nan)

    def overall_fraction(self) -> float:
        total = int(self.collisions.sum())
        return float(self.unitary.sum()) / total if total else math.nan

    def nonunitary_rate(self) -> float:
        """Non-unitary collisions per atom per unit reduced time."""
        nonu = float(self.collisions.sum() - self.unitary.sum())
        return 2.0 * nonu / (self.n_atoms * self.duration) if self.n_atoms else 0.0


def unitary_fraction(state: GasState, arrivals: Sequence[EnvArrival], geometry: WaveGeometry,
                     t_max: float, window: float, dt: float = 0.1) -> UnitaryFractionSeries:
    """Run the gas and classify every collision with the partners' tag sets
    at the collision time, binned into windows of width ``window``."""
    if not t_max > 0 or not window > 0:
        raise DomainError("t_max and window must be positive")
    tracker = WaveTracker(arrivals, geometry)
    t_start = state.time
    n_windows = int(math.ceil(t_max / window - 1e-9))
    coll = np.zeros(n_windows, dtype=np.int64)
    uni = np.zeros(n_windows, dtype=np.int64)
    n_steps = int(round(t_max / dt))
    for _ in range(n_steps):
        _, log = dsmc_step(state, dt)
        wave = tracker.advance(state.time)
        if len(log) == 0:
            continue
        k = min(int((state.time - t_start - 1e-12) / window), n_windows - 1)
        coll[k] += len(log)
        if len(wave) == 0:
            uni[k] += len(log)
            continue
        ma = wave.behind(state.positions[log.first])
        mb = wave.behind(state.positions[log.second])
        uni[k] += int(np.count_nonzero(np.all(ma == mb, axis=1)))
    attach_env_tags(state, tracker.advance(state.time))
    starts = t_start + window * np.arange(n_windows)
    ends = np.minimum(starts + window, t_start + t_max)
    return UnitaryFractionSeries(starts, ends, coll, uni, state.n_atoms, t_max, list(arrivals))


# --------------------------------------------------------------------------
# flux estimate


@dataclass(frozen=True)
class FluxEstimate:
    flux: float  # molecules m^-2 s^-1
    area: float  # m^2
    halving_time: float  # s

    @property
    def flux_per_cm2(self) -> float:
        return self.flux * 1e-4


def molecular_flux(pressure: float, temperature: float, molecular_mass: float,
                   area: float = 1e-4) -> FluxEstimate:
    """Wall collision flux n * v_mean / 4 and the ln2 halving time.

    ``molecular_mass`` in kg, ``area`` in m^2 (default 1 cm^2).
    """
    for name, v in (("pressure", pressure), ("temperature", temperature),
                    ("molecular_mass", molecular_mass), ("area", area)):
        if not v > 0:
            raise DomainError(f"{name} must be positive, got {v!r}")
    n = pressure / (BOLTZMANN * temperature)
    v_mean = math.sqrt(8.0 * BOLTZMANN * temperature / (math.pi * molecular_mass))
    flux = 0.25 * n * v_mean
    return FluxEstimate(flux=flux, area=area, halving_time=math.log(2.0) / (flux * area))


def reduced_arrival_rate(estimate: FluxEstimate, scales: UnitScales) -> float:
    """Arrivals per mean free time on the estimate's area."""
    return estimate.flux * estimate.area * scales.mean_free_time
