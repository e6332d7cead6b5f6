"""Continuum entanglement transport: df1/dt = f1 (1 - f1) + (1/6) d2f1/dx2.

Lengths are in mean free paths and times in mean free times.  The solver is
explicit; the default ``"split"`` scheme advances the reaction term with its
closed-form logistic flow and the diffusion term with forward-time
centred-space differences, while ``"euler"`` applies the plain forward-Euler
update to both terms at once.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import DomainError, NoFrontError, StabilityError, StateError

DIFFUSIVITY = 1.0 / 6.0
OVERSHOOT_TOL = 1e-12
SCHEMES = ("split", "euler")


def pulled_front_speed(rate: float = 1.0, diffusivity: float = DIFFUSIVITY) -> float:
    return 2.0 * math.sqrt(rate * diffusivity)


@dataclass
class FieldGrid:
    values: np.ndarray
    dx: float
    boundary: str = "fixed"  # "fixed": end nodes held at their values; or "periodic"
    x0: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not self.dx > 0:
            raise DomainError(f"dx must be positive, got {self.dx!r}")
        if self.boundary not in ("fixed", "periodic"):
            raise DomainError(f"unknown boundary rule {self.boundary!r}")
        if np.any(self.values < -OVERSHOOT_TOL) or np.any(self.values > 1 + OVERSHOOT_TOL):
            raise StateError("field values must lie in [0, 1]")

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(len(self.values))

    @property
    def length(self) -> float:
        return self.dx * (len(self.values) - 1)

    @classmethod
    def step(cls, length: float, dx: float, x_step: float = 0.0, x0: Optional[float] = None) -> "FieldGrid":
        """1 for x < x_step, 0 for x >= x_step, on nodes spanning ``length``."""
        n = int(round(length / dx)) + 1
        start = -0.5 * length if x0 is None else x0
        x = start + dx * np.arange(n)
        return cls(np.where(x < x_step, 1.0, 0.0), dx, "fixed", start)

    @classmethod
    def uniform(cls, value: float, n: int, dx: float = 1.0) -> "FieldGrid":
        return cls(np.full(n, float(value)), dx, "periodic")


@dataclass
class FieldHistory:
    """Snapshots of f1 on a fixed set of nodes.  NaN marks missing data."""

    x: np.ndarray
    times: list = field(default_factory=list)
    values: list = field(default_factory=list)
    allow_missing: bool = False

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)

    def append(self, time: float, f1) -> None:
        if self.times and not time > self.times[-1]:
            raise StateError("snapshot times must be strictly increasing")
        f1 = np.asarray(f1, dtype=float).copy()
        if f1.shape != self.x.shape:
            raise DomainError("snapshot shape does not match grid")
        if not self.allow_missing and np.any(np.isnan(f1)):
            raise StateError("missing values in a continuum history")
        self.times.append(float(time))
        self.values.append(f1)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def snapshots(self):
        return list(zip(self.times, self.values))

    def as_array(self) -> np.ndarray:
        return np.vstack(self.values) if self.values else np.zeros((0, len(self.x)))


def max_stable_dt(dx: float) -> float:
    return 0.9 * min(dx * dx / (2.0 * DIFFUSIVITY), 0.1)


def _laplacian(f: np.ndarray, dx: float, boundary: str) -> np.ndarray:
    if boundary == "periodic":
        return (np.roll(f, 1) - 2.0 * f + np.roll(f, -1)) / (dx * dx)
    lap = np.zeros_like(f)
    lap[1:-1] = (f[:-2] - 2.0 * f[1:-1] + f[2:]) / (dx * dx)
    return lap


def _logistic_flow(f: np.ndarray, dt: float) -> np.ndarray:
    e = math.exp(dt)
    return f * e / (1.0 + f * (e - 1.0))


def fkpp_step(grid: FieldGrid, dt: float, scheme: str = "split") -> FieldGrid:
    if scheme not in SCHEMES:
        raise DomainError(f"unknown scheme {scheme!r}")
    bound = max_stable_dt(grid.dx)
    if not 0 < dt <= bound * (1 + 1e-12):
        raise StabilityError(f"dt={dt!r} outside (0, {bound:.6g}] for dx={grid.dx!r}")
    f = grid.values
    if scheme == "euler":
        new = f + dt * (f * (1.0 - f) + DIFFUSIVITY * _laplacian(f, grid.dx, grid.boundary))
    else:
        r = _logistic_flow(f, dt)
        new = r + dt * DIFFUSIVITY * _laplacian(r, grid.dx, grid.boundary)
    if grid.boundary == "fixed":
        new[0], new[-1] = f[0], f[-1]
    lo, hi = new.min(), new.max()
    if lo < -OVERSHOOT_TOL or hi > 1.0 + OVERSHOOT_TOL:
        raise StateError(f"field left [0, 1]: min {lo!r}, max {hi!r}")
    np.clip(new, 0.0, 1.0, out=new)
    return replace(grid, values=new)


def solve_fkpp(init: FieldGrid, t_max: float, record_interval: float,
               dt: Optional[float] = None, scheme: str = "split") -> FieldHistory:
    """Integrate to ``t_max``; snapshot at t = 0 and every ``record_interval``."""
    if not t_max > 0 or not record_interval > 0:
        raise DomainError("t_max and record_interval must be positive")
    if dt is None:
        dt = min(0.05, max_stable_dt(init.dx))
    n_steps = int(round(t_max / dt))
    every = max(1, int(round(record_interval / dt)))
    history = FieldHistory(init.x)
    history.append(0.0, init.values)
    grid = init
    for k in range(1, n_steps + 1):
        grid = fkpp_step(grid, dt, scheme)
        if k % every == 0 or k == n_steps:
            history.append(k * dt, grid.values)
    return history


def logistic_reference(f0: float, t: float) -> float:
    if not 0.0 <= f0 <= 1.0:
        raise DomainError(f"f0 must lie in [0, 1], got {f0!r}")
    if f0 == 0.0 or f0 == 1.0:
        return float(f0)
    # written in terms of e^-t so large t cannot overflow
    return f0 / (f0 + (1.0 - f0) * math.exp(-t))


# --------------------------------------------------------------------------
# front analysis


@dataclass
class FrontFit:
    speed: float
    speed_stderr: float
    width_10_90: float
    profile: np.ndarray  # columns: x - x_front, f1
    times: np.ndarray
    positions: np.ndarray
    warnings: list = field(default_factory=list)


def _crossing(x: np.ndarray, f: np.ndarray, level: float, right_of: float = -np.inf,
              left_of: float = np.inf) -> Optional[float]:
    """Largest x where f falls through ``level`` (linear interpolation)."""
    ok = ~np.isnan(f)
    x, f = x[ok], f[ok]
    if len(x) < 2:
        return None
    above = f >= level
    for i in np.flatnonzero(above[:-1] & ~above[1:])[::-1]:
        xc = x[i] + (f[i] - level) / (f[i] - f[i + 1]) * (x[i + 1] - x[i])
        if right_of <= xc <= left_of:
            return float(xc)
    return None


def front_position(x: np.ndarray, f: np.ndarray) -> float:
    xc = _crossing(np.asarray(x, float), np.asarray(f, float), 0.5)
    if xc is None:
        raise NoFrontError("no f1 = 0.5 crossing")
    return xc


def front_width(x: np.ndarray, f: np.ndarray) -> float:
    x, f = np.asarray(x, float), np.asarray(f, float)
    xf = front_position(x, f)
    x10 = _crossing(x, f, 0.1, right_of=xf)
    x90 = _crossing(x, f, 0.9, left_of=xf)
    if x10 is None or x90 is None:
        raise NoFrontError("front has no 10% or 90% crossing")
    return x10 - x90


def analyze_front(history: FieldHistory, window: tuple[float, float]) -> FrontFit:
    """Front speed by least squares over ``window`` plus width and centred profile."""
    t_lo, t_hi = window
    sel = [(t, f) for t, f in history.snapshots if t_lo <= t <= t_hi]
    if len(sel) < 3:
        raise NoFrontError(f"need at least 3 snapshots in window, found {len(sel)}")
    times = np.array([t for t, _ in sel])
    pos = np.array([front_position(history.x, f) for _, f in sel])
    widths = [front_width(history.x, f) for _, f in sel]
    A = np.column_stack((times, np.ones_like(times)))
    coef, *_ = np.linalg.lstsq(A, pos, rcond=None)
    resid = pos - A @ coef
    dof = len(times) - 2
    if dof > 0:
        s2 = float(resid @ resid) / dof
        stderr = math.sqrt(s2 / float(np.sum((times - times.mean()) ** 2)))
    else:
        stderr = 0.0
    notes = []
    dx = float(np.min(np.diff(history.x))) if len(history.x) > 1 else 0.0
    if np.any(np.diff(pos) < -2 * dx):
        notes.append("front position moved backwards by more than two grid spacings")
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
    last_t, last_f = sel[-1]
    profile = np.column_stack((history.x - pos[-1], last_f))
    return FrontFit(speed=float(coef[0]), speed_stderr=stderr,
                    width_10_90=float(np.mean(widths)), profile=profile,
                    times=times, positions=pos, warnings=notes)
