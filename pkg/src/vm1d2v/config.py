"""Run configuration: INI text with sections, parsed without running anything.

Example::

    [run]
    mode = full
    t_final = 5.0
    output_stride = 1
    epsilons = 0.1, 0.25, 0.5

    [grid]
    x_min = -8
    x_max = 8
    v1_min = -1.5
    v1_max = 1.5
    v2_max = 1.5
    n_x = 128
    n_v1 = 64
    n_v2 = 64

    [profile]
    name = even-bump

Unknown sections or keys are errors so that typos never pass silently.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .diagnostics import DEFAULT_EPSILONS
from .errors import ConfigError, GridError
from .phase_space import PROFILE_DEFAULTS, PhaseGrid, ProfileSpec
from .vlasov_solver import SolverOptions, initial_state

MODES = ("full", "vp1d", "cross-validate", "orbit-audit", "convergence-study")

# section -> key -> (type, default); a default of None means required
SCHEMA: dict[str, dict[str, tuple[type, object]]] = {
    "run": {
        "mode": (str, "full"),
        "t_final": (float, None),
        "output_stride": (int, 1),
        "snapshot_stride": (int, 0),
        "epsilons": (str, ", ".join(f"{e:g}" for e in DEFAULT_EPSILONS)),
        "relativistic": (bool, False),
        "neutralize": (bool, True),
        "envelope_check": (bool, True),
        "output_dir": (str, ""),
    },
    "grid": {
        "x_min": (float, None),
        "x_max": (float, None),
        "v1_min": (float, None),
        "v1_max": (float, None),
        "v2_max": (float, None),
        "n_x": (int, None),
        "n_v1": (int, None),
        "n_v2": (int, None),
    },
    "profile": {"name": (str, None)},  # plus the numeric parameters of the preset
    "background": {
        "center": (float, 0.0),
        "width": (float, 3.0),
        "amplitude": (float, 1.0),
        "power": (int, 4),
    },
    "fields": {
        "e2_amplitude": (float, 0.0),
        "e2_center": (float, 0.0),
        "e2_width": (float, 1.0),
        "b_amplitude": (float, 0.0),
        "b_center": (float, 0.0),
        "b_width": (float, 1.0),
        "power": (int, 4),
    },
    "solver": {
        "cfl": (float, 1.0),
        "corrector_iterations": (int, 2),
        "e1_update": (str, "ampere"),
        "support_rtol": (float, SolverOptions.support_rtol),
        "negativity_rtol": (float, SolverOptions.negativity_rtol),
        "clamp_rtol": (float, SolverOptions.clamp_rtol),
        "neutrality_tol": (float, 1e-10),
    },
    "orbits": {
        "lattice": (int, 5),
    },
    "convergence": {
        "levels": (int, 3),
    },
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(section: str, key: str, raw: str, kind: type):
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if kind is int:
            val = float(raw)
            if val != int(val):
                raise ValueError(raw)
            return int(val)
        if kind is float:
            val = float(raw)
            if not math.isfinite(val):
                raise ValueError(raw)
            return val
        return raw
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {kind.__name__}") from None


@dataclass(frozen=True)
class RunConfig:
    grid: PhaseGrid
    profile: ProfileSpec
    t_final: float
    mode: str = "full"
    output_stride: int = 1
    snapshot_stride: int = 0
    epsilons: tuple = DEFAULT_EPSILONS
    relativistic: bool = False
    neutralize: bool = True
    envelope_check: bool = True
    output_dir: str = ""
    background: dict = field(default_factory=dict)
    e2: dict | None = None
    b_field: dict | None = None
    solver: dict = field(default_factory=dict)
    orbit_lattice: int = 5
    convergence_levels: int = 3
    sections: dict = field(default_factory=dict, compare=False)

    @property
    def dt(self) -> float:
        return self.grid.dx

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def initial_state(self):
        return initial_state(
            self.grid,
            self.profile,
            background=self.background,
            e2=self.e2,
            b_field=self.b_field,
            rescale_background=self.neutralize,
            neutrality_tol=self.solver.get("neutrality_tol", 1e-10),
            relativistic=self.relativistic,
        )

    def solver_options(self, f0=None) -> SolverOptions:
        kw = {k: v for k, v in self.solver.items() if k != "neutrality_tol"}
        return SolverOptions(relativistic=self.relativistic, **kw)

    def with_grid(self, grid: PhaseGrid) -> "RunConfig":
        sections = {k: dict(v) for k, v in self.sections.items()}
        sections.setdefault("grid", {}).update(n_x=grid.n_x, n_v1=grid.n_v1, n_v2=grid.n_v2)
        return replace(self, grid=grid, sections=sections)

    def to_ini(self) -> str:
        """Canonical text of every setting in effect, defaults included."""
        lines = []
        for section, keys in self.sections.items():
            lines.append(f"[{section}]")
            for key, val in keys.items():
                if isinstance(val, bool):
                    val = "true" if val else "false"
                elif isinstance(val, float):
                    val = repr(val)
                lines.append(f"{key} = {val}")
            lines.append("")
        return "\n".join(lines)


def _apply_overrides(parser: configparser.ConfigParser, overrides: Iterable[str]) -> None:
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        lhs, value = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key.strip(), value.strip())


def parse_config(text: str, overrides: Iterable[str] = ()) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable config: {exc}") from None
    _apply_overrides(parser, overrides)

    unknown = [s for s in parser.sections() if s not in SCHEMA]
    if unknown:
        raise ConfigError(f"unknown config sections: {unknown}")

    values: dict[str, dict] = {}
    for section, schema in SCHEMA.items():
        given = dict(parser.items(section)) if parser.has_section(section) else {}
        out = {}
        for key, (kind, default) in schema.items():
            if key in given:
                out[key] = _convert(section, key, given.pop(key), kind)
            elif default is None:
                raise ConfigError(f"missing required setting [{section}] {key}")
            else:
                out[key] = default
        if section == "profile":
            name = out["name"]
            if name not in PROFILE_DEFAULTS:
                raise ConfigError(f"unknown profile {name!r}; expected one of {sorted(PROFILE_DEFAULTS)}")
            for key in list(given):
                if key not in PROFILE_DEFAULTS[name]:
                    continue
                kind = int if key == "power" else float
                out[key] = _convert(section, key, given.pop(key), kind)
        if given:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(given)}")
        values[section] = out
    return _build(values)


def _build(values: dict[str, dict]) -> RunConfig:
    run, g, prof = values["run"], values["grid"], values["profile"]
    if run["mode"] not in MODES:
        raise ConfigError(f"unknown mode {run['mode']!r}; expected one of {MODES}")
    if not run["t_final"] > 0:
        raise ConfigError(f"t_final must be positive, got {run['t_final']}")
    if run["output_stride"] < 1:
        raise ConfigError(f"output_stride must be at least 1, got {run['output_stride']}")
    if run["snapshot_stride"] < 0:
        raise ConfigError("snapshot_stride must be nonnegative (0 disables snapshots)")
    try:
        eps = tuple(float(e) for e in run["epsilons"].replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"epsilons must be a list of numbers, got {run['epsilons']!r}") from None
    if not eps or any(not 0.0 < e < 1.0 for e in eps):
        raise ConfigError(f"epsilons must lie in (0, 1), got {eps}")
    try:
        grid = PhaseGrid(g["x_min"], g["x_max"], g["v1_min"], g["v1_max"], -g["v2_max"], g["v2_max"], g["n_x"], g["n_v1"], g["n_v2"])
    except GridError as exc:
        raise ConfigError(f"invalid grid: {exc}") from None
    steps = run["t_final"] / grid.dx
    if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
        raise ConfigError(f"t_final = {run['t_final']} is not a whole number of steps dt = dx = {grid.dx}")

    name = prof.pop("name")
    try:
        profile = ProfileSpec(name, prof)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    fl = values["fields"]
    power = fl["power"]
    e2 = dict(amplitude=fl["e2_amplitude"], center=fl["e2_center"], width=fl["e2_width"], power=power) if fl["e2_amplitude"] else None
    b_field = dict(amplitude=fl["b_amplitude"], center=fl["b_center"], width=fl["b_width"], power=power) if fl["b_amplitude"] else None

    solver = dict(values["solver"])
    try:
        SolverOptions(**{k: v for k, v in solver.items() if k != "neutrality_tol"})
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if values["orbits"]["lattice"] < 1:
        raise ConfigError("orbit lattice size must be at least 1")
    if values["convergence"]["levels"] < 2:
        raise ConfigError("a convergence study needs at least 2 levels")

    sections = {k: dict(v) for k, v in values.items()}
    sections["profile"] = {"name": name, **prof}
    sections["run"]["epsilons"] = ", ".join(repr(e) for e in eps)
    return RunConfig(
        grid=grid,
        profile=profile,
        t_final=run["t_final"],
        mode=run["mode"],
        output_stride=run["output_stride"],
        snapshot_stride=run["snapshot_stride"],
        epsilons=eps,
        relativistic=run["relativistic"],
        neutralize=run["neutralize"],
        envelope_check=run["envelope_check"],
        output_dir=run["output_dir"],
        background=dict(values["background"]),
        e2=e2,
        b_field=b_field,
        solver=solver,
        orbit_lattice=values["orbits"]["lattice"],
        convergence_levels=values["convergence"]["levels"],
        sections=sections,
    )


def load_config(path, overrides: Iterable[str] = ()) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, overrides)


def envelope_check(config: RunConfig, f0=None) -> None:
    """Dry-run support estimate: the free-streaming envelope must fit the box.

    The spatial support of f0 is widened by max |v1| on its support times
    t_final and must stay at least one cell away from both ends.  A box that
    fails this is a configuration error.
    """
    if f0 is None:
        f0, _, _ = config.initial_state()
    mask = f0.values > 0.0
    if not np.any(mask):
        return
    g = config.grid
    xs = g.x[mask.any(axis=(1, 2))]
    v1s = g.v1[mask.any(axis=(0, 2))]
    reach = float(np.max(np.abs(v1s))) * config.t_final
    if config.relativistic:
        reach = min(reach, config.t_final)
    lo, hi = xs.min() - reach, xs.max() + reach
    if lo <= g.x_min + g.dx or hi >= g.x_max - g.dx:
        raise ConfigError(
            f"box too small: free-streaming envelope [{lo:.4g}, {hi:.4g}] "
            f"does not fit inside [{g.x_min}, {g.x_max}] by t = {config.t_final}"
        )
