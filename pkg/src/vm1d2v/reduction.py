"""Electrostatic reduction for data even in v2.

When f0 is even in v2 and E2 = B = 0 initially, the magnetic part of the
dynamics never switches on and each v2 node is a passive parameter of a 1D
Vlasov-Poisson problem in (x, v1).  ``step_vp`` advances that reduced
system with the same sweeps as the full solver, with E1 taken from Gauss's
law; ``cross_validate`` runs both solvers side by side.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import SymmetryError
from .fields import FieldState, check_alignment, init_E1_from_gauss
from .phase_space import Background, DistributionFunction, PhaseGrid, compute_moments
from .vlasov_solver import ForceField, SolverOptions, _check_state, advect_v1, advect_x, check_cfl, step_strang


@dataclass(frozen=True)
class VPState:
    """f on the (x, v1) grid for every v2 node, stored as one 3D array."""

    grid: PhaseGrid
    values: np.ndarray
    E1: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float, copy=True)
        E1 = np.array(self.E1, dtype=float, copy=True)
        if values.shape != self.grid.shape or E1.shape != (self.grid.n_x + 1,):
            raise ValueError("VP state arrays do not match the grid")
        values.flags.writeable = False
        E1.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "E1", E1)

    @classmethod
    def from_full(cls, f: DistributionFunction, fields: FieldState) -> "VPState":
        return cls(f.grid, f.values, fields.E1, f.time)

    @property
    def distribution(self) -> DistributionFunction:
        return DistributionFunction(self.grid, self.values, self.time)

    def fields(self) -> FieldState:
        zero = np.zeros_like(self.E1)
        return FieldState(self.grid, self.E1, zero, zero, self.time)


def step_vp(state: VPState, b: Background, dt: float, options: SolverOptions | None = None) -> VPState:
    """x half step, E1 from Gauss, v1 sweep, x half step, E1 from Gauss."""
    opts = options or SolverOptions()
    g = state.grid
    check_alignment(dt, g.dx)
    rel = opts.relativistic
    fs = advect_x(state.values, g, 0.5 * dt, rel)
    E1m = init_E1_from_gauss(compute_moments(fs, b, rel, grid=g), g.dx, tol=np.inf)
    zero = np.zeros_like(E1m)
    force = ForceField(g, E1m, zero, zero, rel)
    check_cfl(force, dt, opts.cfl)
    fv = advect_v1(fs, g, force, dt)
    values = advect_x(fv, g, 0.5 * dt, rel)
    values, _ = _check_state(values, opts, float(np.max(np.abs(state.values))))
    E1 = init_E1_from_gauss(compute_moments(values, b, rel, grid=g), g.dx, tol=np.inf)
    return VPState(g, values, E1, state.time + dt)


def check_symmetric(f0: DistributionFunction, fields0: FieldState) -> None:
    """Raise SymmetryError unless f0 is even in v2 and E2 = B = 0."""
    diff = np.abs(f0.values - f0.values[..., ::-1])
    if np.any(diff > 0.0):
        # report the worst pair, with the negative-v2 node first
        i, j, k = np.unravel_index(int(np.argmax(diff)), diff.shape)
        k, m = sorted((int(k), f0.grid.n_v2 - int(k)))
        raise SymmetryError(
            f"symmetry precondition: f0 is not even in v2, node pair (x={i}, v1={j}, v2={k}) "
            f"and (x={i}, v1={j}, v2={m}) hold {float(f0.values[i, j, k])!r} and {float(f0.values[i, j, m])!r}"
        )
    for name in ("E2", "B"):
        arr = getattr(fields0, name)
        if np.any(arr != 0.0):
            i = int(np.argmax(arr != 0.0))
            raise SymmetryError(f"symmetry precondition: initial {name} is nonzero at x node {i}")


@dataclass(frozen=True)
class DiscrepancyRow:
    time: float
    f_max: float
    f_l1: float
    E1_max: float
    E1_l1: float
    em_full: float  # max|E2| + max|B| of the full solver


COLUMNS = ("time", "f_max", "f_l1", "E1_max", "E1_l1", "em_full")


@dataclass
class DiscrepancyReport:
    grid: PhaseGrid
    rows: list = field(default_factory=list)

    @property
    def max_f(self) -> float:
        return max((r.f_max for r in self.rows), default=0.0)

    @property
    def max_E1(self) -> float:
        return max((r.E1_max for r in self.rows), default=0.0)

    @property
    def max_em(self) -> float:
        return max((r.em_full for r in self.rows), default=0.0)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            for r in self.rows:
                w.writerow([repr(float(getattr(r, c))) for c in COLUMNS])

    def to_text(self) -> str:
        g = self.grid
        lines = [
            "full solver vs reduced Vlasov-Poisson solver",
            f"grid {g.n_x} x {g.n_v1} x {g.n_v2}, {len(self.rows)} output times",
            f"max |f_full - f_vp|      = {self.max_f:.6e}",
            f"max |E1_full - E1_vp|    = {self.max_E1:.6e}",
            f"max |E2| + max |B| (full) = {self.max_em:.6e}",
        ]
        return "\n".join(lines) + "\n"


def _compare(f: DistributionFunction, fields: FieldState, vp: VPState) -> DiscrepancyRow:
    g = f.grid
    df = np.abs(f.values - vp.values)
    dE = np.abs(fields.E1 - vp.E1)
    return DiscrepancyRow(
        time=float(f.time),
        f_max=float(df.max()),
        f_l1=float(df.sum() * g.dx * g.dv1 * g.dv2),
        E1_max=float(dE.max()),
        E1_l1=float(dE.sum() * g.dx),
        em_full=float(np.max(np.abs(fields.E2)) + np.max(np.abs(fields.B))),
    )


def compare_solvers(
    f0: DistributionFunction,
    fields0: FieldState,
    b: Background,
    t_final: float,
    output_stride: int = 1,
    options: SolverOptions | None = None,
) -> DiscrepancyReport:
    """Run the full and reduced solvers from the same symmetric data."""
    check_symmetric(f0, fields0)
    opts = options or SolverOptions()
    g = f0.grid
    dt = g.dx
    n = int(round(t_final / dt))
    f, fields = f0, fields0
    vp = VPState.from_full(f0, fields0)
    report = DiscrepancyReport(g, [_compare(f, fields, vp)])
    for k in range(1, n + 1):
        f, fields, _ = step_strang(f, fields, b, dt, opts)
        vp = step_vp(vp, b, dt, opts)
        if k % output_stride == 0 or k == n:
            report.rows.append(_compare(f, fields, vp))
    return report


def cross_validate(config) -> DiscrepancyReport:
    """Cross-validate the two solvers on the initial data of a run config.

    The symmetry precondition is checked before anything is advanced.
    """
    f0, fields0, b = config.initial_state()
    check_symmetric(f0, fields0)
    return compare_solvers(f0, fields0, b, config.t_final, config.output_stride, config.solver_options(f0))
