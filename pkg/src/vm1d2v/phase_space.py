"""Phase-space grid, distribution function, background density and moments.

The grid is vertex centred: an axis with ``n`` cells carries ``n + 1`` nodes
including both end points.  The distribution must vanish on those outer
nodes, which keeps the support strictly inside the box.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import GridError, NeutralityError, SupportError

MIN_CELLS = 4

PROFILE_NAMES = ("zero", "even-bump", "two-stream", "asymmetric-bump")

_HEADER = struct.Struct("<6d3qd")


# ---------------------------------------------------------------------------
# grid


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform tensor grid over (x, v1, v2)."""

    x_min: float
    x_max: float
    v1_min: float
    v1_max: float
    v2_min: float
    v2_max: float
    n_x: int
    n_v1: int
    n_v2: int

    def __post_init__(self) -> None:
        spans = {
            "x": (self.x_min, self.x_max),
            "v1": (self.v1_min, self.v1_max),
            "v2": (self.v2_min, self.v2_max),
        }
        for name, (lo, hi) in spans.items():
            if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
                raise GridError(f"{name} extent must be a non-empty interval, got [{lo}, {hi}]")
        counts = (self.n_x, self.n_v1, self.n_v2)
        if any(int(n) != n for n in counts):
            raise GridError(f"cell counts must be integers, got {counts}")
        if min(counts) < MIN_CELLS:
            raise GridError(f"count below minimum ({MIN_CELLS}): {counts}")
        if self.v2_min != -self.v2_max:
            raise GridError(f"v2 extent not symmetric: [{self.v2_min}, {self.v2_max}]")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_x

    @property
    def dv1(self) -> float:
        return (self.v1_max - self.v1_min) / self.n_v1

    @property
    def dv2(self) -> float:
        return (self.v2_max - self.v2_min) / self.n_v2

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_x + 1, self.n_v1 + 1, self.n_v2 + 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_x + 1)

    @property
    def v1(self) -> np.ndarray:
        return np.linspace(self.v1_min, self.v1_max, self.n_v1 + 1)

    @property
    def v2(self) -> np.ndarray:
        # exact antisymmetry: v2[k] == -v2[-1 - k] bitwise
        v = np.linspace(self.v2_min, self.v2_max, self.n_v2 + 1)
        return 0.5 * (v - v[::-1])

    @property
    def extents(self) -> tuple[float, ...]:
        return (self.x_min, self.x_max, self.v1_min, self.v1_max, self.v2_min, self.v2_max)

    @property
    def counts(self) -> tuple[int, int, int]:
        return (self.n_x, self.n_v1, self.n_v2)

    def refined(self, factor: int = 2) -> "PhaseGrid":
        return PhaseGrid(
            *self.extents,
            self.n_x * factor,
            self.n_v1 * factor,
            self.n_v2 * factor,
        )

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.v1, self.v2, indexing="ij")


def make_grid(extents, counts) -> PhaseGrid:
    """Build a grid from ``((x_min, x_max), (v1_min, v1_max), (v2_min, v2_max))``
    and cell counts ``(n_x, n_v1, n_v2)``."""
    (x0, x1), (a0, a1), (b0, b1) = extents
    n_x, n_v1, n_v2 = counts
    return PhaseGrid(
        float(x0), float(x1), float(a0), float(a1), float(b0), float(b1),
        int(n_x), int(n_v1), int(n_v2),
    )


def trapezoid_weights(n_nodes: int, h: float) -> np.ndarray:
    w = np.full(n_nodes, h)
    w[0] = w[-1] = 0.5 * h
    return w


def node_weights(n_nodes: int, h: float) -> np.ndarray:
    """Equal weights h on every node (periodic trapezoid rule).

    Identical to the closed rule for data vanishing on the end nodes; unlike
    it, the weighted sum is exactly what the spline sweeps conserve, so
    dust reaching the outer layer cannot show up as a charge defect.
    """
    return np.full(n_nodes, h)


# ---------------------------------------------------------------------------
# distribution, background, moments


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class DistributionFunction:
    grid: PhaseGrid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        if self.values.shape != self.grid.shape:
            raise GridError(f"values shape {self.values.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", _frozen(self.values))

    def total_charge(self) -> float:
        """Integral of f over phase space (equal node weights)."""
        return float(np.sum(velocity_integral(self.values, self.grid)) * self.grid.dx)

    def max_value(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


@dataclass(frozen=True)
class Background:
    """Neutralising density b(x) sampled on the spatial nodes."""

    grid: PhaseGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != (self.grid.n_x + 1,):
            raise GridError("background must live on the spatial nodes")
        if np.any(self.values < 0):
            raise ValueError("background density must be nonnegative")
        object.__setattr__(self, "values", _frozen(self.values))

    @property
    def total(self) -> float:
        return float(np.dot(self.values, trapezoid_weights(self.grid.n_x + 1, self.grid.dx)))


@dataclass(frozen=True)
class Moments:
    """Velocity moments on the spatial nodes.

    ``density`` is the ion number density (integral of f over v); ``rho`` has
    the background subtracted.
    """

    rho: np.ndarray
    j1: np.ndarray
    j2: np.ndarray
    density: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        for name in ("rho", "j1", "j2", "density"):
            val = getattr(self, name)
            if val is None:
                val = np.zeros_like(self.rho)
            object.__setattr__(self, name, _frozen(val))


def velocity_integral(values: np.ndarray, grid: PhaseGrid, weight: np.ndarray | None = None, odd: bool = False) -> np.ndarray:
    """Integral of ``weight * values`` over (v1, v2) at each x node.

    Uses :func:`node_weights`.  The v2 sum is folded into mirror pairs before reduction.  For an even
    ``weight`` (``odd=False``) the pair is summed, for an odd weight it is
    differenced; either way the result is bitwise invariant (or bitwise
    negated) under v2 -> -v2 of ``values``, and an odd moment of v2-even data
    is exactly zero.
    """
    n2 = values.shape[-1]
    h = n2 // 2
    w1 = node_weights(grid.n_v1 + 1, grid.dv1)
    w2 = node_weights(n2, grid.dv2)
    if weight is None:
        weight = np.ones(values.shape[-2:])
    wlo = weight[:, :h] * w1[:, None] * w2[None, :h]
    lo = values[..., :h]
    hi = values[..., ::-1][..., :h]
    if odd:
        return np.sum((lo - hi) * wlo, axis=(-2, -1))
    total = np.sum((lo + hi) * wlo, axis=(-2, -1))
    if n2 % 2:
        total = total + np.sum(values[..., h] * (weight[:, h] * w1 * w2[h]), axis=-1)
    return total


def velocity_map(v1, v2, relativistic: bool = False):
    """Identity, or v / sqrt(1 + |v|^2) when ``relativistic``."""
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    if not relativistic:
        return v1, v2
    gamma = np.sqrt(1.0 + v1 * v1 + v2 * v2)
    return v1 / gamma, v2 / gamma


def compute_moments(f: DistributionFunction | np.ndarray, b: Background, relativistic: bool = False, grid: PhaseGrid | None = None) -> Moments:
    """rho = int f dv - b and j = int vhat f dv on the spatial nodes."""
    if isinstance(f, DistributionFunction):
        grid, values = f.grid, f.values
    else:
        values = f
        grid = grid or b.grid
    if grid.counts != b.grid.counts or grid.extents != b.grid.extents:
        raise GridError("distribution and background live on different grids")
    V1, V2 = np.meshgrid(grid.v1, grid.v2, indexing="ij")
    u1, u2 = velocity_map(V1, V2, relativistic)
    density = velocity_integral(values, grid)
    j1 = velocity_integral(values, grid, u1)
    j2 = velocity_integral(values, grid, u2, odd=True)
    return Moments(rho=density - b.values, j1=j1, j2=j2, density=density)


# ---------------------------------------------------------------------------
# support handling


def outer_layer_max(values: np.ndarray) -> float:
    """Largest |value| on the boundary nodes of the box."""
    faces = (
        values[0], values[-1],
        values[:, 0], values[:, -1],
        values[:, :, 0], values[:, :, -1],
    )
    return max(float(np.max(np.abs(face))) for face in faces)


def check_support(values: np.ndarray, tol: float = 0.0) -> None:
    worst = outer_layer_max(values)
    if worst > tol:
        raise SupportError(f"support reached boundary: |f| = {worst:.3e} on the outer layer (tolerance {tol:.3e})")


# ---------------------------------------------------------------------------
# profiles


def bump(s, power: int = 4):
    """(1 - s^2)^power on |s| < 1, zero outside; C^(power-1) with compact support."""
    s = np.asarray(s, dtype=float)
    return np.where(np.abs(s) < 1.0, np.clip(1.0 - s * s, 0.0, None) ** power, 0.0)


def bump_integral(power: int = 4) -> float:
    """Integral of ``bump`` over the real line."""
    return math.sqrt(math.pi) * math.gamma(power + 1) / math.gamma(power + 1.5)


PROFILE_DEFAULTS: dict[str, dict[str, float]] = {
    "zero": {},
    "even-bump": dict(
        density=1.0, x_center=0.0, x_width=2.5, v1_center=0.1, v1_width=0.6,
        v2_center=0.0, v2_width=0.6, perturbation=0.3, wavenumber=1.5, power=4,
    ),
    "two-stream": dict(
        density=1.0, x_center=0.0, x_width=2.5, drift=0.3, v1_width=0.5,
        v2_center=0.15, v2_width=0.6, perturbation=0.3, wavenumber=1.5, power=4,
    ),
    "asymmetric-bump": dict(
        density=1.0, x_center=0.0, x_width=2.5, v1_center=0.1, v1_width=0.6,
        v2_center=0.25, v2_width=0.6, perturbation=0.3, wavenumber=1.5, power=4,
    ),
}


@dataclass(frozen=True)
class ProfileSpec:
    """A named initial profile with overrides of its default parameters."""

    name: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.name not in PROFILE_DEFAULTS:
            raise ValueError(f"unknown profile {self.name!r}; expected one of {PROFILE_NAMES}")
        unknown = set(self.params) - set(PROFILE_DEFAULTS[self.name])
        if unknown:
            raise ValueError(f"unknown parameters for profile {self.name!r}: {sorted(unknown)}")

    def resolved(self) -> dict[str, float]:
        out = dict(PROFILE_DEFAULTS[self.name])
        out.update(self.params)
        return out


def evaluate_profile(spec: ProfileSpec, x, v1, v2) -> np.ndarray:
    """Closed-form f0 at arbitrary points (broadcasting)."""
    p = spec.resolved()
    x, v1, v2 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, v1, v2)))
    if spec.name == "zero":
        return np.zeros(x.shape)
    power = int(p["power"])
    xs = (x - p["x_center"]) / p["x_width"]
    spatial = bump(xs, power) * (1.0 + p["perturbation"] * np.cos(p["wavenumber"] * (x - p["x_center"])))
    if spec.name == "two-stream":
        vel1 = 0.5 * (bump((v1 - p["drift"]) / p["v1_width"], power) + bump((v1 + p["drift"]) / p["v1_width"], power))
    else:
        vel1 = bump((v1 - p["v1_center"]) / p["v1_width"], power)
    if spec.name == "even-bump":
        # depends on v2 only through v2**2, hence exactly even on the mirrored grid
        vel2 = bump(v2 / p["v2_width"], power)
    else:
        vel2 = bump((v2 - p["v2_center"]) / p["v2_width"], power)
    return p["density"] * spatial * vel1 * vel2


def sample_initial_distribution(spec: ProfileSpec | str, grid: PhaseGrid) -> DistributionFunction:
    if isinstance(spec, str):
        spec = ProfileSpec(spec)
    X, V1, V2 = grid.mesh()
    values = evaluate_profile(spec, X, V1, V2)
    if np.any(values < 0):
        raise ValueError("profile produced negative values; perturbation must satisfy |perturbation| < 1")
    try:
        check_support(values, 0.0)
    except SupportError as exc:
        raise SupportError(f"initial profile {spec.name!r} touches the box boundary") from exc
    return DistributionFunction(grid, values, 0.0)


def make_background(grid: PhaseGrid, center: float = 0.0, width: float = 3.0, amplitude: float = 1.0, power: int = 4) -> Background:
    values = amplitude * bump((grid.x - center) / width, power)
    if values[0] != 0.0 or values[-1] != 0.0:
        raise SupportError("background support touches the spatial boundary")
    return Background(grid, values)


def neutralize(background: Background, f: DistributionFunction, rescale: bool = True, tol: float = 1e-10) -> Background:
    """Enforce total charge of f equal to the background integral.

    With ``rescale`` the background is scaled by (int f0)/(int b); otherwise a
    relative mismatch above ``tol`` raises :class:`NeutralityError`.
    """
    q = f.total_charge()
    tb = background.total
    if rescale:
        if tb == 0.0:
            if q == 0.0:
                return background
            raise NeutralityError("cannot rescale an identically zero background")
        return Background(background.grid, background.values * (q / tb))
    scale = max(abs(q), abs(tb))
    if scale > 0 and abs(q - tb) > tol * scale:
        raise NeutralityError(f"neutrality violated: int f0 = {q:.12g}, int b = {tb:.12g}")
    return background


# ---------------------------------------------------------------------------
# snapshots


def write_snapshot(path, f: DistributionFunction, fields: Any = None) -> None:
    """Little-endian snapshot: header (extents, counts, time), values in
    (i_x, i_v1, i_v2) row-major order, then optionally E1, E2, B, A."""
    g = f.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(*g.extents, *g.counts, float(f.time)))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())
        if fields is not None:
            for name in ("E1", "E2", "B", "A"):
                fh.write(np.ascontiguousarray(getattr(fields, name), dtype="<f8").tobytes())


def read_snapshot(path) -> tuple[DistributionFunction, dict[str, np.ndarray] | None]:
    raw = Path(path).read_bytes()
    head = _HEADER.unpack_from(raw, 0)
    grid = PhaseGrid(*head[:6], *(int(n) for n in head[6:9]))
    time = head[9]
    offset = _HEADER.size
    count = int(np.prod(grid.shape))
    values = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(grid.shape)
    offset += 8 * count
    fields = None
    nx = grid.n_x + 1
    if len(raw) - offset == 4 * 8 * nx:
        block = np.frombuffer(raw, dtype="<f8", offset=offset).reshape(4, nx)
        fields = dict(zip(("E1", "E2", "B", "A"), (np.array(a) for a in block)))
    elif len(raw) != offset:
        raise ValueError(f"snapshot {path} has {len(raw) - offset} trailing bytes")
    return DistributionFunction(grid, values.astype(float), time), fields
