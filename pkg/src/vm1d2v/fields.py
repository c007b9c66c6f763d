"""Electromagnetic fields E1, E2, B on the spatial nodes.

E2 and B are advanced along light cones with the time step locked to the
grid spacing, so the transport part of the update is an exact index shift.
E1 comes from Gauss's law at t = 0 and from Ampere's law afterwards.  The
potential A is always rebuilt from B, never evolved on its own.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import AlignmentError, NeutralityError
from .phase_space import Moments, PhaseGrid, bump, trapezoid_weights

ALIGN_RTOL = 1e-12


def compute_A(B: np.ndarray, dx: float) -> np.ndarray:
    """Cumulative trapezoid integral of B from the left end, A[0] = 0."""
    return cumulative_trapezoid(np.asarray(B, dtype=float), dx=dx, initial=0.0)


@dataclass(frozen=True)
class FieldState:
    grid: PhaseGrid
    E1: np.ndarray
    E2: np.ndarray
    B: np.ndarray
    time: float = 0.0
    A: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        n = self.grid.n_x + 1
        for name in ("E1", "E2", "B"):
            arr = np.array(getattr(self, name), dtype=float, copy=True)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        A = compute_A(self.B, self.grid.dx)
        A.flags.writeable = False
        object.__setattr__(self, "A", A)

    @classmethod
    def zeros(cls, grid: PhaseGrid, time: float = 0.0) -> "FieldState":
        z = np.zeros(grid.n_x + 1)
        return cls(grid, z, z, z, time)

    def energy(self) -> float:
        w = trapezoid_weights(self.grid.n_x + 1, self.grid.dx)
        return float(np.dot(self.E1 * self.E1 + self.E2 * self.E2 + self.B * self.B, w))

    def replace(self, **changes) -> "FieldState":
        kw = dict(E1=self.E1, E2=self.E2, B=self.B, time=self.time)
        kw.update(changes)
        return FieldState(self.grid, **kw)


def sample_field_profile(grid: PhaseGrid, amplitude: float, center: float, width: float, power: int = 4) -> np.ndarray:
    """Compactly supported initial E2 or B profile.  Must vanish on the end nodes."""
    values = amplitude * bump((grid.x - center) / width, power)
    if values[0] != 0.0 or values[-1] != 0.0:
        raise ValueError("initial field profile must be supported strictly inside the box")
    return values


def init_E1_from_gauss(moments: Moments | np.ndarray, dx: float, tol: float = 1e-10) -> np.ndarray:
    """E1(x) = integral of rho from the left end (trapezoid).

    E1 must vanish again at the right end; otherwise the data are not neutral
    and :class:`NeutralityError` is raised.  The tolerance is relative to the
    total ion plus background charge (or to int |rho| when only rho is given).
    """
    if isinstance(moments, Moments):
        rho = np.asarray(moments.rho)
        background = moments.density - rho
        w = trapezoid_weights(rho.size, dx)
        scale = float(np.dot(np.abs(moments.density), w) + np.dot(np.abs(background), w))
    else:
        rho = np.asarray(moments, dtype=float)
        scale = float(np.dot(np.abs(rho), trapezoid_weights(rho.size, dx)))
    E1 = cumulative_trapezoid(rho, dx=dx, initial=0.0)
    if abs(E1[-1]) > tol * max(scale, np.finfo(float).tiny):
        raise NeutralityError(f"charge is not neutral: int rho dx = {E1[-1]:.6g} (scale {scale:.6g})")
    return E1


def check_alignment(dt: float, dx: float) -> None:
    if abs(dt - dx) > ALIGN_RTOL * dx:
        raise AlignmentError(f"light-cone alignment required: dt = {dt!r} but dx = {dx!r}")


def advance_fields_lightcone(state: FieldState, j2_mid: np.ndarray, dt: float) -> FieldState:
    """Advance (E2, B) one step of size dt = dx along the light cones.

    E2 + B moves right and E2 - B moves left by exactly one node; the source
    is j2 at the half step averaged to the cell midpoint.  Nothing enters
    from outside the box.  E1 is carried over unchanged.
    """
    check_alignment(dt, state.grid.dx)
    j2_mid = np.asarray(j2_mid, dtype=float)
    j_half = 0.5 * (j2_mid[:-1] + j2_mid[1:])
    right = state.E2 + state.B
    left = state.E2 - state.B
    new_right = np.zeros_like(right)
    new_left = np.zeros_like(left)
    new_right[1:] = right[:-1] - dt * j_half
    new_left[:-1] = left[1:] - dt * j_half
    return FieldState(
        state.grid,
        state.E1,
        0.5 * (new_right + new_left),
        0.5 * (new_right - new_left),
        state.time + dt,
    )


def advance_E1_ampere(E1: np.ndarray, j1_mid: np.ndarray, dt: float) -> np.ndarray:
    E1 = np.asarray(E1, dtype=float)
    j1_mid = np.asarray(j1_mid, dtype=float)
    if E1.shape != j1_mid.shape:
        raise ValueError(f"shape mismatch: E1 {E1.shape} vs j1 {j1_mid.shape}")
    return E1 - dt * j1_mid


def gauss_residual(E1: np.ndarray, rho: np.ndarray, dx: float) -> float:
    """max |centred dE1/dx - rho| over interior nodes."""
    dE = (E1[2:] - E1[:-2]) / (2.0 * dx)
    return float(np.max(np.abs(dE - rho[1:-1])))


def wave_residual_A(A_history, j2: np.ndarray, dt: float, dx: float) -> np.ndarray:
    """Centred residual of (d_tt - d_xx) A - j2 at the middle of three time levels.

    ``A_history`` holds A at t - dt, t, t + dt; the result covers interior
    nodes only.
    """
    if len(A_history) < 3:
        raise ValueError("wave residual needs three consecutive A levels")
    check_alignment(dt, dx)
    a_prev, a_now, a_next = (np.asarray(a, dtype=float) for a in A_history[-3:])
    d_tt = (a_next[1:-1] - 2.0 * a_now[1:-1] + a_prev[1:-1]) / dt**2
    d_xx = (a_now[2:] - 2.0 * a_now[1:-1] + a_now[:-2]) / dx**2
    return d_tt - d_xx - np.asarray(j2, dtype=float)[1:-1]
