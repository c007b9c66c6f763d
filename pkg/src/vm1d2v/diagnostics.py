"""Per-step scalar diagnostics.

Diagnostics only observe: they never modify the state and never raise on
bad values.  Acceptance decisions belong to the caller.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .fields import FieldState, gauss_residual
from .phase_space import Background, DistributionFunction, compute_moments, velocity_integral

SUPPORT_RTOL = 1e-5
DEFAULT_EPSILONS = (0.1, 0.25, 0.5)

CSV_COLUMNS = (
    "time",
    "kinetic_energy",
    "field_energy",
    "total_charge",
    "Q_support",
    "sup_A",
    "gauss_residual",
    "sym_error",
    "min_v1_gap",
)


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    kinetic_energy: float
    field_energy: float
    total_charge: float
    Q_support: float
    sup_A: float
    gauss_residual: float
    sym_error: float
    seps_grad_sup: dict = field(default_factory=dict)
    min_v1_gap: float = 0.0
    v_support: float = 0.0  # instantaneous max |v| on the support
    min_f: float = 0.0

    @property
    def total_energy(self) -> float:
        return self.kinetic_energy + self.field_energy

    def row(self, epsilons: Sequence[float]) -> list[float]:
        base = [getattr(self, name) for name in CSV_COLUMNS]
        return base + [self.seps_grad_sup.get(float(e), 0.0) for e in epsilons]


def support_mask(f: DistributionFunction, threshold: float) -> np.ndarray:
    return f.values > threshold


def seps_gradient_monitor(f: DistributionFunction, epsilons: Iterable[float], magnitude: np.ndarray | None = None) -> dict[float, float]:
    """sup of |d_x f| + |grad_v f| over nodes with ||v1| - 1| > eps.

    Centred differences inside the box, second-order one-sided ones on its
    faces.  An empty set gives 0.
    """
    g = f.grid
    if magnitude is None:
        magnitude = gradient_magnitude(f)
    gap = np.abs(np.abs(g.v1) - 1.0)
    # sup over x and v2 first, then over the admissible v1 nodes
    per_v1 = magnitude.max(axis=(0, 2)) if magnitude.size else np.zeros(g.n_v1 + 1)
    out = {}
    for eps in epsilons:
        eps = float(eps)
        if not 0.0 < eps < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {eps}")
        sel = gap > eps
        out[eps] = float(per_v1[sel].max()) if np.any(sel) else 0.0
    return out


def gradient_magnitude(f: DistributionFunction) -> np.ndarray:
    g = f.grid
    fx, f1, f2 = np.gradient(f.values, g.dx, g.dv1, g.dv2, edge_order=2)
    return np.abs(fx) + np.sqrt(f1 * f1 + f2 * f2)


def kinetic_energy(f: DistributionFunction, relativistic: bool = False) -> float:
    """int |v|^2 f, or 2 int (gamma - 1) f in the relativistic case."""
    g = f.grid
    V1, V2 = np.meshgrid(g.v1, g.v2, indexing="ij")
    v_sq = V1 * V1 + V2 * V2
    weight = 2.0 * (np.sqrt(1.0 + v_sq) - 1.0) if relativistic else v_sq
    return float(np.sum(velocity_integral(f.values, g, weight)) * g.dx)


def record(
    f: DistributionFunction,
    fields: FieldState,
    b: Background,
    epsilons: Sequence[float] = DEFAULT_EPSILONS,
    support_threshold: float | None = None,
    previous: DiagnosticsRecord | None = None,
    relativistic: bool = False,
) -> DiagnosticsRecord:
    """Compute every diagnostic for one state.

    ``support_threshold`` defines f != 0 on the grid (default
    ``SUPPORT_RTOL * max f``).  ``Q_support`` is the running value
    1 + sup |v| over the support up to this time, so pass the previous
    record to carry the supremum forward.
    """
    g = f.grid
    if support_threshold is None:
        support_threshold = SUPPORT_RTOL * f.max_value()
    moments = compute_moments(f, b, relativistic)
    supp = support_mask(f, support_threshold) if f.max_value() > 0 else np.zeros(g.shape, bool)

    V1, V2 = np.meshgrid(g.v1, g.v2, indexing="ij")
    speed = np.sqrt(V1 * V1 + V2 * V2)
    vel_supp = supp.any(axis=0)
    v_support = float(speed[vel_supp].max()) if np.any(vel_supp) else 0.0
    Q = 1.0 + v_support
    if previous is not None:
        Q = max(Q, previous.Q_support)

    v1_supp = vel_supp.any(axis=1)
    gaps = np.abs(np.abs(g.v1) - 1.0)
    min_gap = float(gaps[v1_supp].min()) if np.any(v1_supp) else 0.0

    return DiagnosticsRecord(
        time=float(f.time),
        kinetic_energy=kinetic_energy(f, relativistic),
        field_energy=fields.energy(),
        total_charge=f.total_charge(),
        Q_support=Q,
        sup_A=float(np.max(np.abs(fields.A))),
        gauss_residual=gauss_residual(fields.E1, moments.rho, g.dx),
        sym_error=float(np.max(np.abs(f.values - f.values[..., ::-1]))),
        seps_grad_sup=seps_gradient_monitor(f, epsilons),
        min_v1_gap=min_gap,
        v_support=v_support,
        min_f=float(f.values.min()),
    )


def energy_drift(records: Sequence[DiagnosticsRecord]) -> float:
    """Largest relative deviation of kinetic + field energy from its first value."""
    if len(records) < 2:
        raise ValueError("energy drift needs at least two records")
    e0 = records[0].total_energy
    scale = abs(e0) if e0 != 0.0 else 1.0
    return max(abs(r.total_energy - e0) for r in records) / scale


def charge_drift(records: Sequence[DiagnosticsRecord]) -> float:
    q0 = records[0].total_charge
    scale = abs(q0) if q0 != 0.0 else 1.0
    return max(abs(r.total_charge - q0) for r in records) / scale


def _fmt(x: float) -> str:
    return repr(float(x)) if math.isfinite(x) else str(x)


def csv_header(epsilons: Sequence[float]) -> list[str]:
    return list(CSV_COLUMNS) + [f"seps_{float(e):g}" for e in epsilons]


def write_csv(records: Sequence[DiagnosticsRecord], path, epsilons: Sequence[float] = DEFAULT_EPSILONS) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(epsilons))
        for r in records:
            w.writerow([_fmt(x) for x in r.row(epsilons)])


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in row] for row in body]) if body else np.zeros((0, len(header)))
    return {name: data[:, i] for i, name in enumerate(header)}
