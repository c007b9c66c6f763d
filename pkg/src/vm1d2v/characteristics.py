"""Characteristic curves through a stored field history.

Along a characteristic,

    dX/ds = vhat1(V),  dV1/ds = E1 + vhat2 B,  dV2/ds = E2 - vhat1 B,

with fields evaluated at (s, X(s)).  Integration is classical RK4 with
step dt/2 of the stored history.  Fields are linear in time between stored
states and cubic splines in x.  Everything is vectorised over orbits.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import EscapeError
from .fields import FieldState
from .phase_space import DistributionFunction, velocity_map

_SPAN_RTOL = 1e-9


@dataclass(frozen=True)
class CharacteristicState:
    s: float
    X: np.ndarray
    V1: np.ndarray
    V2: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    """RK nodes of a batch of orbits.  X, V1, V2 have shape (n_steps + 1, n_orbits)."""

    s: np.ndarray
    X: np.ndarray
    V1: np.ndarray
    V2: np.ndarray

    @property
    def final(self) -> CharacteristicState:
        return CharacteristicState(float(self.s[-1]), self.X[-1], self.V1[-1], self.V2[-1])


class FieldHistory:
    """Field snapshots at uniformly spaced times with an (s, x) accessor."""

    def __init__(self, states: Sequence[FieldState]):
        states = tuple(states)
        if len(states) < 2:
            raise ValueError("a field history needs at least two snapshots")
        times = np.array([st.time for st in states])
        steps = np.diff(times)
        if np.any(steps <= 0) or np.max(np.abs(steps - steps[0])) > 1e-9 * steps[0]:
            raise ValueError("field history snapshots must be uniformly spaced in time")
        grid = states[0].grid
        if any(st.grid != grid for st in states):
            raise ValueError("field history snapshots live on different grids")
        self.states = states
        self.grid = grid
        self.times = times
        self.dt = float(steps[0])
        self.span = (float(times[0]), float(times[-1]))
        self.x_range = (grid.x_min, grid.x_max)
        self._splines: dict[int, CubicSpline] = {}

    def _spline(self, k: int) -> CubicSpline:
        sp = self._splines.get(k)
        if sp is None:
            st = self.states[k]
            sp = CubicSpline(self.grid.x, np.stack([st.E1, st.E2, st.B, st.A]), axis=1, bc_type="natural")
            self._splines[k] = sp
        return sp

    def evaluate(self, s: float, x) -> np.ndarray:
        """(E1, E2, B, A) at time s and positions x; shape (4,) + x.shape."""
        x = np.asarray(x, dtype=float)
        pos = (s - self.span[0]) / self.dt
        k = int(min(max(math.floor(pos), 0), len(self.states) - 2))
        w = pos - k
        lo = self._spline(k)(x)
        if w == 0.0:
            return lo
        hi = self._spline(k + 1)(x)
        return (1.0 - w) * lo + w * hi


class AnalyticHistory:
    """Field history given by a callable ``(s, x) -> (E1, E2, B, A)``.

    For synthetic tests; ``dt`` sets the RK step exactly as for stored
    snapshots.
    """

    def __init__(self, func: Callable, span: tuple[float, float], x_range: tuple[float, float], dt: float):
        self.func = func
        self.span = (float(span[0]), float(span[1]))
        self.x_range = (float(x_range[0]), float(x_range[1]))
        self.dt = float(dt)

    def evaluate(self, s: float, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([np.broadcast_to(np.asarray(c, dtype=float), x.shape) for c in self.func(s, x)])


def _check_span(history, t: float, s_target: float) -> None:
    lo, hi = history.span
    tol = _SPAN_RTOL * max(history.dt, abs(lo), abs(hi), 1.0)
    if min(t, s_target) < lo - tol or max(t, s_target) > hi + tol:
        raise ValueError(f"interval [{min(t, s_target)}, {max(t, s_target)}] is outside the field history {history.span}")


def _check_inside(history, X: np.ndarray, s: float) -> None:
    lo, hi = history.x_range
    tol = 1e-12 * (hi - lo)
    out = (X < lo - tol) | (X > hi + tol)
    if np.any(out):
        i = int(np.argmax(out))
        raise EscapeError(f"characteristic escaped domain: orbit {i} at s = {s:.6g}, X = {X.flat[i]:.6g}")


def _rhs(history, s, X, V1, V2, relativistic):
    _check_inside(history, X, s)
    E1, E2, B, _ = history.evaluate(s, X)
    u1, u2 = velocity_map(V1, V2, relativistic)
    return u1, E1 + u2 * B, E2 - u1 * B


def trace_characteristics(history, t: float, x, v1, v2, s_target: float, relativistic: bool = False) -> Trajectory:
    """RK4 from (t, x, v) to s_target, keeping every step."""
    _check_span(history, t, s_target)
    X = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    V1 = np.broadcast_to(np.asarray(v1, dtype=float), X.shape).copy()
    V2 = np.broadcast_to(np.asarray(v2, dtype=float), X.shape).copy()
    span = s_target - t
    n = int(math.ceil(abs(span) / (0.5 * history.dt) - 1e-9)) if span else 0
    h = span / n if n else 0.0
    s_nodes = t + h * np.arange(n + 1)
    if n:
        s_nodes[-1] = s_target
    Xs, V1s, V2s = [X.copy()], [V1.copy()], [V2.copy()]
    for k in range(n):
        s = s_nodes[k]
        a = _rhs(history, s, X, V1, V2, relativistic)
        b = _rhs(history, s + 0.5 * h, X + 0.5 * h * a[0], V1 + 0.5 * h * a[1], V2 + 0.5 * h * a[2], relativistic)
        c = _rhs(history, s + 0.5 * h, X + 0.5 * h * b[0], V1 + 0.5 * h * b[1], V2 + 0.5 * h * b[2], relativistic)
        d = _rhs(history, s + h, X + h * c[0], V1 + h * c[1], V2 + h * c[2], relativistic)
        X = X + (h / 6.0) * (a[0] + 2.0 * b[0] + 2.0 * c[0] + d[0])
        V1 = V1 + (h / 6.0) * (a[1] + 2.0 * b[1] + 2.0 * c[1] + d[1])
        V2 = V2 + (h / 6.0) * (a[2] + 2.0 * b[2] + 2.0 * c[2] + d[2])
        Xs.append(X.copy())
        V1s.append(V1.copy())
        V2s.append(V2.copy())
    if n:
        _check_inside(history, X, s_target)
    return Trajectory(s_nodes, np.array(Xs), np.array(V1s), np.array(V2s))


def integrate_characteristic(history, t: float, x, v, s_target: float, relativistic: bool = False) -> CharacteristicState:
    """State at s_target of the characteristic through (t, x, v).

    ``v`` is a pair (v1, v2); all inputs broadcast, so one call integrates
    a whole batch of orbits.
    """
    v1, v2 = v
    return trace_characteristics(history, t, x, v1, v2, s_target, relativistic).final


def v2A_drift(history, t: float, x, v, s_target: float | None = None, relativistic: bool = False):
    """|(v2 + A(t, x)) - (V2(s) + A(s, X(s)))| with s = s_target (default: history start)."""
    if s_target is None:
        s_target = history.span[0]
    end = integrate_characteristic(history, t, x, v, s_target, relativistic)
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    start_inv = np.broadcast_to(np.asarray(v[1], dtype=float), x_arr.shape) + history.evaluate(t, x_arr)[3]
    end_inv = end.V2 + history.evaluate(end.s, end.X)[3]
    drift = np.abs(start_inv - end_inv)
    return float(drift[0]) if np.ndim(x) == 0 else drift


def min_distance_to_light_speed(history, orbits, t: float | None = None, s_target: float | None = None, relativistic: bool = False) -> float:
    """min over orbits and RK nodes of ||V1(s)| - 1|.

    ``orbits`` is a triple (x, v1, v2) of arrays at time t (default: history
    start), integrated to s_target (default: history end).
    """
    t = history.span[0] if t is None else t
    s_target = history.span[1] if s_target is None else s_target
    tr = trace_characteristics(history, t, *orbits, s_target=s_target, relativistic=relativistic)
    return float(np.min(np.abs(np.abs(tr.V1) - 1.0)))


def orbit_lattice(f: DistributionFunction, n: int = 5, threshold: float | None = None):
    """n x n x n lattice over the bounding box of supp f; returns (x, v1, v2)."""
    if threshold is None:
        threshold = 1e-5 * f.max_value()
    mask = f.values > threshold
    if not np.any(mask):
        raise ValueError("orbit lattice needs a distribution with nonempty support")
    g = f.grid
    axes = []
    for dim, coords in enumerate((g.x, g.v1, g.v2)):
        other = tuple(a for a in range(3) if a != dim)
        idx = np.flatnonzero(mask.any(axis=other))
        axes.append(np.linspace(coords[idx[0]], coords[idx[-1]], n))
    X, V1, V2 = np.meshgrid(*axes, indexing="ij")
    return X.ravel(), V1.ravel(), V2.ravel()


def support_nodes(f: DistributionFunction, count: int = 125, level: float = 1e-2):
    """Up to ``count`` node indices (i_x, i_v1, i_v2) where f > level * max f,
    evenly spaced in flat index order."""
    flat = np.flatnonzero(f.values.ravel() > level * f.max_value())
    if flat.size == 0:
        raise ValueError("no nodes above the sampling level")
    pick = flat[np.unique(np.linspace(0, flat.size - 1, min(count, flat.size)).round().astype(int))]
    return np.unravel_index(pick, f.values.shape)


def write_orbit_csv(path, trajectory: Trajectory, history) -> None:
    """One row per (orbit, RK node): orbit, s, X, V1, V2, A(s, X), V2 + A."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["orbit", "s", "X", "V1", "V2", "A", "invariant"])
        A = np.array([history.evaluate(s, X)[3] for s, X in zip(trajectory.s, trajectory.X)])
        n_orbits = trajectory.X.shape[1]
        for i in range(n_orbits):
            for k, s in enumerate(trajectory.s):
                row = (s, trajectory.X[k, i], trajectory.V1[k, i], trajectory.V2[k, i], A[k, i], trajectory.V2[k, i] + A[k, i])
                w.writerow([i] + [repr(float(r)) for r in row])
