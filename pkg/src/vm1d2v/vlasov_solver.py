"""Strang-split semi-Lagrangian step for the 1.5D Vlasov-Maxwell system.

One step of size dt = dx:

1. x-advection over dt/2,
2. moments of the intermediate state and the half-step currents,
3. field update (light-cone shift for E2 +/- B, Ampere for E1),
4. velocity advection over dt with the fields frozen at the half step,
5. x-advection over dt/2.

The half-step current is j(f*) + (dt/2) * int (K . grad_v vhat) f* dv, the
first-order change of j under the velocity flow, evaluated with the
half-step fields.  That makes the exchange between kinetic and field energy
consistent to O(dt^3) per step.  The dependence on the half-step fields is
resolved by a fixed number of corrector passes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .advection import shift_along_axis
from .errors import CFLError, NumericalError
from .fields import (
    FieldState,
    advance_E1_ampere,
    advance_fields_lightcone,
    check_alignment,
    init_E1_from_gauss,
    sample_field_profile,
)
from .phase_space import (
    Background,
    DistributionFunction,
    Moments,
    PhaseGrid,
    ProfileSpec,
    check_support,
    compute_moments,
    make_background,
    neutralize,
    sample_initial_distribution,
    velocity_integral,
    velocity_map,
)

log = logging.getLogger(__name__)

__all__ = [
    "ForceField",
    "SolverOptions",
    "Simulation",
    "initial_state",
    "step_strang",
    "velocity_map",
]


@dataclass(frozen=True)
class SolverOptions:
    relativistic: bool = False
    e1_update: str = "ampere"  # or "gauss"
    cfl: float = 1.0
    corrector_iterations: int = 2
    # thresholds relative to max |f| of the state entering the step
    support_rtol: float = 1e-5
    clamp_rtol: float = 0.0
    negativity_rtol: float = 0.25

    def __post_init__(self) -> None:
        if self.e1_update not in ("ampere", "gauss"):
            raise ValueError(f"e1_update must be 'ampere' or 'gauss', got {self.e1_update!r}")
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError(f"cfl multiple must lie in (0, 1], got {self.cfl}")


@dataclass(frozen=True)
class ForceField:
    """K = (E1 + vhat2 B, E2 - vhat1 B) built from node values of the fields."""

    grid: PhaseGrid
    E1: np.ndarray
    E2: np.ndarray
    B: np.ndarray
    relativistic: bool = False

    def K1(self, v1=None) -> np.ndarray:
        """Force along v1.  Shape (n_x, n_v2) per sweep line, or
        (n_x, n_v1, n_v2) in the relativistic case."""
        g = self.grid
        if not self.relativistic:
            return self.E1[:, None] + g.v2[None, :] * self.B[:, None]
        v1 = g.v1[None, :, None] if v1 is None else v1
        _, u2 = velocity_map(v1, g.v2[None, None, :], True)
        return self.E1[:, None, None] + u2 * self.B[:, None, None]

    def K2(self, v2=None) -> np.ndarray:
        g = self.grid
        if not self.relativistic:
            return self.E2[:, None] - g.v1[None, :] * self.B[:, None]
        v2 = g.v2[None, None, :] if v2 is None else v2
        u1, _ = velocity_map(g.v1[None, :, None], v2, True)
        return self.E2[:, None, None] - u1 * self.B[:, None, None]


# ---------------------------------------------------------------------------
# sweeps


def advect_x(values: np.ndarray, grid: PhaseGrid, tau: float, relativistic: bool = False) -> np.ndarray:
    V1, V2 = np.meshgrid(grid.v1, grid.v2, indexing="ij")
    u1, _ = velocity_map(V1, V2, relativistic)
    return shift_along_axis(values, u1 * (tau / grid.dx), axis=0)


def advect_v1(values: np.ndarray, grid: PhaseGrid, force: ForceField, tau: float) -> np.ndarray:
    if not force.relativistic:
        return shift_along_axis(values, force.K1() * (tau / grid.dv1), axis=1)
    # departure points by a midpoint iteration, K1 depends on v1 through gamma
    v1 = grid.v1[None, :, None]
    d = tau * force.K1()
    d = tau * force.K1(v1 - 0.5 * d)
    return shift_along_axis(values, d / grid.dv1, axis=1)


def advect_v2(values: np.ndarray, grid: PhaseGrid, force: ForceField, tau: float) -> np.ndarray:
    if not force.relativistic:
        return shift_along_axis(values, force.K2() * (tau / grid.dv2), axis=2)
    v2 = grid.v2[None, None, :]
    d = tau * force.K2()
    d = tau * force.K2(v2 - 0.5 * d)
    return shift_along_axis(values, d / grid.dv2, axis=2)


def check_cfl(force: ForceField, dt: float, cfl: float) -> None:
    g = force.grid
    k1 = float(np.max(np.abs(force.K1())))
    k2 = float(np.max(np.abs(force.K2())))
    if k1 * dt > cfl * g.dv1 or k2 * dt > cfl * g.dv2:
        raise CFLError(
            f"velocity CFL violated: max|K1| = {k1:.4g}, max|K2| = {k2:.4g}, "
            f"dt = {dt:.4g}, limits {cfl * g.dv1 / dt:.4g} and {cfl * g.dv2 / dt:.4g}"
        )


def advect_velocity(values: np.ndarray, grid: PhaseGrid, force: ForceField, dt: float) -> np.ndarray:
    """Velocity flow over dt with frozen fields.

    Without a magnetic field the two sweeps are commuting translations and
    run once each.  Otherwise the rotation is split symmetrically
    (v1 half, v2 full, v1 half) to keep second order.
    """
    if not np.any(force.B):
        out = advect_v1(values, grid, force, dt)
        return advect_v2(out, grid, force, dt)
    out = advect_v1(values, grid, force, 0.5 * dt)
    out = advect_v2(out, grid, force, dt)
    return advect_v1(out, grid, force, 0.5 * dt)


# ---------------------------------------------------------------------------
# half-step currents


class _CurrentCorrection:
    """Integrals of f* needed for d/dt j under the frozen-field velocity flow."""

    def __init__(self, values: np.ndarray, grid: PhaseGrid, moments: Moments, relativistic: bool):
        self.relativistic = relativistic
        if not relativistic:
            self.n, self.j1, self.j2 = moments.density, moments.j1, moments.j2
            return
        V1, V2 = np.meshgrid(grid.v1, grid.v2, indexing="ij")
        gamma = np.sqrt(1.0 + V1 * V1 + V2 * V2)
        g3 = gamma**3
        g2 = gamma**2
        self.w11 = velocity_integral(values, grid, 1.0 / gamma - V1 * V1 / g3)
        self.w12 = velocity_integral(values, grid, -V1 * V2 / g3, odd=True)
        self.w22 = velocity_integral(values, grid, 1.0 / gamma - V2 * V2 / g3)
        self.m1 = velocity_integral(values, grid, V2 / g2, odd=True)
        self.m2 = velocity_integral(values, grid, -V1 / g2)

    def __call__(self, E1, E2, B):
        if not self.relativistic:
            return E1 * self.n + B * self.j2, E2 * self.n - B * self.j1
        return (
            E1 * self.w11 + E2 * self.w12 + B * self.m1,
            E1 * self.w12 + E2 * self.w22 + B * self.m2,
        )


# ---------------------------------------------------------------------------
# the step


def _check_state(values: np.ndarray, opts: SolverOptions, scale: float) -> tuple[np.ndarray, float]:
    if not np.all(np.isfinite(values)):
        raise NumericalError("non-finite values in the distribution")
    check_support(values, opts.support_rtol * scale)
    fmin = float(values.min())
    if fmin < -opts.negativity_rtol * scale:
        raise NumericalError(f"distribution undershoot {fmin:.3e} below the abort level {-opts.negativity_rtol * scale:.3e}")
    clamped = 0.0
    if opts.clamp_rtol > 0.0 and fmin < 0.0:
        dust = (values < 0.0) & (values >= -opts.clamp_rtol * scale)
        if np.any(dust):
            values = values.copy()
            clamped = float(-values[dust].sum())
            values[dust] = 0.0
    return values, clamped


def step_strang(
    f: DistributionFunction,
    fields: FieldState,
    b: Background,
    dt: float,
    options: SolverOptions | None = None,
) -> tuple[DistributionFunction, FieldState, Moments]:
    """Advance (f, E, B) by one step; returns the new state and its moments."""
    opts = options or SolverOptions()
    g = f.grid
    check_alignment(dt, g.dx)
    rel = opts.relativistic
    half = 0.5 * dt

    fs = advect_x(f.values, g, half, rel)
    mom_s = compute_moments(fs, b, rel, grid=g)
    correction = _CurrentCorrection(fs, g, mom_s, rel)

    E1n, E2n, Bn = fields.E1, fields.E2, fields.B
    E1m, E2m, Bm = E1n, E2n, Bn
    if opts.e1_update == "gauss":
        E1m = init_E1_from_gauss(mom_s, g.dx, tol=np.inf)
    E1_new = E1n
    for _ in range(1 + opts.corrector_iterations):
        c1, c2 = correction(E1m, E2m, Bm)
        j1m = mom_s.j1 + half * c1
        j2m = mom_s.j2 + half * c2
        advanced = advance_fields_lightcone(fields, j2m, dt)
        E2m = 0.5 * (E2n + advanced.E2)
        Bm = 0.5 * (Bn + advanced.B)
        if opts.e1_update == "ampere":
            E1_new = advance_E1_ampere(E1n, j1m, dt)
            E1m = 0.5 * (E1n + E1_new)

    force = ForceField(g, E1m, E2m, Bm, rel)
    check_cfl(force, dt, opts.cfl)
    fv = advect_velocity(fs, g, force, dt)
    values = advect_x(fv, g, half, rel)
    values, clamped = _check_state(values, opts, f.max_value())
    if clamped:
        log.info("t=%.6g: clamped %.3e of negative dust", f.time + dt, clamped)

    f_new = DistributionFunction(g, values, f.time + dt)
    moments = compute_moments(f_new, b, rel)
    if opts.e1_update == "gauss":
        E1_new = init_E1_from_gauss(moments, g.dx, tol=np.inf)
    fields_new = FieldState(g, E1_new, advanced.E2, advanced.B, fields.time + dt)
    return f_new, fields_new, moments


# ---------------------------------------------------------------------------
# set-up and driver


def initial_state(
    grid: PhaseGrid,
    profile: ProfileSpec | str,
    background: dict | None = None,
    e2: dict | None = None,
    b_field: dict | None = None,
    rescale_background: bool = True,
    neutrality_tol: float = 1e-10,
    relativistic: bool = False,
) -> tuple[DistributionFunction, FieldState, Background]:
    """Sample f0, the neutralising background and the initial fields.

    ``background``, ``e2`` and ``b_field`` are keyword dictionaries for
    :func:`make_background` and :func:`sample_field_profile`.
    """
    f0 = sample_initial_distribution(profile, grid)
    bg = make_background(grid, **(background or {}))
    if f0.total_charge() == 0.0 and rescale_background:
        bg = Background(grid, np.zeros(grid.n_x + 1))
    bg = neutralize(bg, f0, rescale=rescale_background, tol=neutrality_tol)
    zero = np.zeros(grid.n_x + 1)
    E2 = sample_field_profile(grid, **e2) if e2 else zero
    B = sample_field_profile(grid, **b_field) if b_field else zero
    E1 = init_E1_from_gauss(compute_moments(f0, bg, relativistic), grid.dx, tol=neutrality_tol)
    return f0, FieldState(grid, E1, E2, B, 0.0), bg


@dataclass
class Simulation:
    """Holds the evolving state and applies :func:`step_strang`.

    Thresholds are relative to max |f| of the state entering each step.
    """

    f: DistributionFunction
    fields: FieldState
    background: Background
    relativistic: bool = False
    e1_update: str = "ampere"
    cfl: float = 1.0
    corrector_iterations: int = 2
    support_rtol: float = 1e-5
    clamp_rtol: float = 0.0
    negativity_rtol: float = 0.25
    keep_history: bool = False
    history: list = field(default_factory=list)
    moments: Moments | None = None
    steps: int = 0

    def __post_init__(self) -> None:
        self.options = SolverOptions(
            relativistic=self.relativistic,
            e1_update=self.e1_update,
            cfl=self.cfl,
            corrector_iterations=self.corrector_iterations,
            support_rtol=self.support_rtol,
            clamp_rtol=self.clamp_rtol,
            negativity_rtol=self.negativity_rtol,
        )
        if self.moments is None:
            self.moments = compute_moments(self.f, self.background, self.relativistic)
        if self.keep_history and not self.history:
            self.history.append(self.fields)

    @property
    def grid(self) -> PhaseGrid:
        return self.f.grid

    @property
    def dt(self) -> float:
        return self.f.grid.dx

    @property
    def time(self) -> float:
        return self.f.time

    def step(self) -> None:
        self.f, self.fields, self.moments = step_strang(self.f, self.fields, self.background, self.dt, self.options)
        self.steps += 1
        if self.keep_history:
            self.history.append(self.fields)

    def run(self, t_final: float, callback: Callable[["Simulation"], None] | None = None) -> "Simulation":
        n = int(round(t_final / self.dt))
        if callback is not None and self.steps == 0:
            callback(self)
        for _ in range(n - self.steps):
            self.step()
            if callback is not None:
                callback(self)
        return self
