"""Run orchestration, persistence and plot-data emission.

A run directory holds:

- ``manifest.json``: every setting and tolerance in effect,
- ``config.ini``: the canonical config text,
- ``diagnostics.csv``: one row per output step,
- ``profiles.npz``: spatial profiles and phase-space marginals per output step,
- ``snapshot_XXXXXX.bin``: full snapshots when a snapshot stride is set,
- mode-specific reports,
- ``status.json``: exit code and reason, written last.
"""

from __future__ import annotations

import json
import logging
import math
import os
import platform
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .advection import set_num_threads
from .characteristics import (
    FieldHistory,
    orbit_lattice,
    support_nodes,
    trace_characteristics,
    write_orbit_csv,
)
from .config import RunConfig, envelope_check
from .diagnostics import SUPPORT_RTOL, DiagnosticsRecord, energy_drift, charge_drift, read_csv, record, write_csv
from .errors import ConfigError, VMError
from .fields import ALIGN_RTOL, FieldState
from .phase_space import Background, DistributionFunction, compute_moments, evaluate_profile, write_snapshot
from .reduction import VPState, check_symmetric, compare_solvers, step_vp
from .vlasov_solver import Simulation

log = logging.getLogger(__name__)

PROFILE_FIELDS = ("rho", "j1", "j2", "E1", "E2", "B", "A")
MARGINALS = ("f_xv1", "f_xv2")


# ---------------------------------------------------------------------------
# manifest and status


def manifest(config: RunConfig) -> dict:
    g = config.grid
    opts = config.solver_options()
    return {
        "package": "vm1d2v",
        "version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "config": config.sections,
        "grid": {"extents": list(g.extents), "counts": list(g.counts), "dx": g.dx, "dv1": g.dv1, "dv2": g.dv2},
        "dt": config.dt,
        "n_steps": config.n_steps,
        "tolerances": {
            "support_rtol": opts.support_rtol,
            "negativity_rtol": opts.negativity_rtol,
            "clamp_rtol": opts.clamp_rtol,
            "neutrality_tol": config.solver["neutrality_tol"],
            "diagnostics_support_rtol": SUPPORT_RTOL,
            "alignment_rtol": ALIGN_RTOL,
            "cfl": opts.cfl,
        },
        "scheme": {
            "splitting": "x half / fields / velocity / x half, dt = dx",
            "velocity_split": "v1 then v2 when B = 0, else v1 half / v2 / v1 half",
            "interpolation": "periodic cubic B-spline",
            "quadrature": "equal node weights",
            "field_update": "light-cone shift for E2 +/- B, " + ("Gauss" if opts.e1_update == "gauss" else "Ampere") + " for E1",
            "half_step_current": f"predictor plus {opts.corrector_iterations} corrector passes",
            "relativistic": config.relativistic,
            "epsilons": list(config.epsilons),
        },
    }


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# recording


class Recorder:
    """Collects diagnostics, profiles and snapshots along a run."""

    def __init__(self, config: RunConfig, out: Path, b: Background, f0: DistributionFunction):
        self.config = config
        self.out = out
        self.b = b
        self.threshold = SUPPORT_RTOL * f0.max_value()
        self.records: list[DiagnosticsRecord] = []
        self.profiles: dict[str, list] = {k: [] for k in ("t",) + PROFILE_FIELDS + MARGINALS}
        self.min_f = 0.0

    def __call__(self, step: int, f: DistributionFunction, fields: FieldState, last: bool = False) -> None:
        cfg = self.config
        if step % cfg.output_stride == 0 or last:
            prev = self.records[-1] if self.records else None
            rec = record(f, fields, self.b, cfg.epsilons, self.threshold, prev, cfg.relativistic)
            self.records.append(rec)
            self.min_f = min(self.min_f, rec.min_f)
            self._profiles(f, fields)
        if cfg.snapshot_stride and (step % cfg.snapshot_stride == 0 or last):
            write_snapshot(self.out / f"snapshot_{step:06d}.bin", f, fields)

    def _profiles(self, f: DistributionFunction, fields: FieldState) -> None:
        g = f.grid
        m = compute_moments(f, self.b, self.config.relativistic)
        p = self.profiles
        p["t"].append(f.time)
        p["rho"].append(m.rho)
        p["j1"].append(m.j1)
        p["j2"].append(m.j2)
        for name in ("E1", "E2", "B", "A"):
            p[name].append(np.array(getattr(fields, name)))
        p["f_xv1"].append(f.values.sum(axis=2) * g.dv2)
        p["f_xv2"].append(f.values.sum(axis=1) * g.dv1)

    def finish(self, name: str = "diagnostics.csv") -> None:
        write_csv(self.records, self.out / name, self.config.epsilons)
        g = self.config.grid
        arrays = {k: np.array(v) for k, v in self.profiles.items()}
        np.savez(self.out / "profiles.npz", x=g.x, v1=g.v1, v2=g.v2, **arrays)

    def summary(self) -> dict:
        if not self.records:
            return {}
        out = {
            "records": len(self.records),
            "final_time": self.records[-1].time,
            "min_f": self.min_f,
            "max_sym_error": max(r.sym_error for r in self.records),
            "max_sup_A": max(r.sup_A for r in self.records),
            "Q_support": self.records[-1].Q_support,
        }
        if len(self.records) > 1:
            out["energy_drift"] = energy_drift(self.records)
            out["charge_drift"] = charge_drift(self.records)
        return out


# ---------------------------------------------------------------------------
# modes


def _simulation(config: RunConfig, f0, fields0, b, keep_history: bool = False) -> Simulation:
    opts = config.solver_options()
    return Simulation(
        f0,
        fields0,
        b,
        relativistic=opts.relativistic,
        e1_update=opts.e1_update,
        cfl=opts.cfl,
        corrector_iterations=opts.corrector_iterations,
        support_rtol=opts.support_rtol,
        clamp_rtol=opts.clamp_rtol,
        negativity_rtol=opts.negativity_rtol,
        keep_history=keep_history,
    )


def _prepare(config: RunConfig):
    f0, fields0, b = config.initial_state()
    if config.envelope_check:
        envelope_check(config, f0)
    return f0, fields0, b


def _run_simulation(config: RunConfig, out: Path, keep_history: bool = False):
    f0, fields0, b = _prepare(config)
    rec = Recorder(config, out, b, f0)
    sim = _simulation(config, f0, fields0, b, keep_history)
    n = config.n_steps
    try:
        sim.run(config.t_final, lambda s: rec(s.steps, s.f, s.fields, last=s.steps == n))
    finally:
        rec.finish()
    return sim, rec


def run_full(config: RunConfig, out: Path) -> dict:
    _, rec = _run_simulation(config, out)
    return rec.summary()


def run_vp1d(config: RunConfig, out: Path) -> dict:
    f0, fields0, b = _prepare(config)
    check_symmetric(f0, fields0)
    opts = config.solver_options()
    rec = Recorder(config, out, b, f0)
    state = VPState.from_full(f0, fields0)
    n = config.n_steps
    try:
        rec(0, state.distribution, state.fields(), last=n == 0)
        for k in range(1, n + 1):
            state = step_vp(state, b, config.dt, opts)
            rec(k, state.distribution, state.fields(), last=k == n)
    finally:
        rec.finish()
    return rec.summary()


def run_cross_validate(config: RunConfig, out: Path) -> dict:
    f0, fields0, b = config.initial_state()
    check_symmetric(f0, fields0)
    if config.envelope_check:
        envelope_check(config, f0)
    report = compare_solvers(f0, fields0, b, config.t_final, config.output_stride, config.solver_options())
    report.write_csv(out / "cross_validation.csv")
    (out / "cross_validation.txt").write_text(report.to_text())
    return {"max_f_discrepancy": report.max_f, "max_E1_discrepancy": report.max_E1, "max_E2_plus_B": report.max_em}


def moc_residual(history, f: DistributionFunction, profile, points, relativistic: bool = False) -> np.ndarray:
    """|f(t, node) - f0(X(0), V(0))| at the given node indices (i_x, i_v1, i_v2)."""
    g = f.grid
    ix, i1, i2 = (np.asarray(p) for p in points)
    tr = trace_characteristics(history, f.time, g.x[ix], g.v1[i1], g.v2[i2], history.span[0], relativistic)
    end = tr.final
    exact = evaluate_profile(profile, end.X, end.V1, end.V2)
    return np.abs(f.values[ix, i1, i2] - exact)


def run_orbit_audit(config: RunConfig, out: Path) -> dict:
    sim, rec = _run_simulation(config, out, keep_history=True)
    history = FieldHistory(sim.history)
    f0, _, _ = config.initial_state()
    n = config.orbit_lattice
    lattice = orbit_lattice(f0, n)
    tr = trace_characteristics(history, 0.0, *lattice, s_target=config.t_final, relativistic=config.relativistic)
    write_orbit_csv(out / "orbits.csv", tr, history)
    A = np.array([history.evaluate(s, X)[3] for s, X in zip(tr.s, tr.X)])
    inv = tr.V2 + A
    drift = np.abs(inv - inv[0])
    gap = float(np.min(np.abs(np.abs(tr.V1) - 1.0)))
    resid = moc_residual(history, sim.f, config.profile, support_nodes(sim.f, n**3), config.relativistic)
    summary = rec.summary()
    summary.update(
        orbits=int(tr.X.shape[1]),
        max_v2A_drift=float(drift.max()),
        min_distance_to_light_speed=gap,
        max_moc_residual=float(resid.max()),
    )
    _write_json(out / "orbit_audit.json", {k: summary[k] for k in ("orbits", "max_v2A_drift", "min_distance_to_light_speed", "max_moc_residual")})
    return summary


def refinement_error(coarse: DistributionFunction, fine: DistributionFunction) -> float:
    """max |f_coarse(node) - f_fine(same node)| for a fine grid refined by 2."""
    return float(np.max(np.abs(coarse.values - fine.values[::2, ::2, ::2])))


def convergence_study(config: RunConfig, out: Path | None = None) -> list[dict]:
    """Runs at successively doubled resolution with the observed orders.

    Row k compares level k against level k + 1, so the finest level has no
    refinement error of its own.
    """
    rows = []
    finals = []
    grid = config.grid
    for level in range(config.convergence_levels):
        cfg = config.with_grid(grid)
        f0, fields0, b = _prepare(cfg)
        records: list[DiagnosticsRecord] = []
        thr = SUPPORT_RTOL * f0.max_value()
        sim = _simulation(cfg, f0, fields0, b)

        def cb(s: Simulation) -> None:
            prev = records[-1] if records else None
            records.append(record(s.f, s.fields, b, cfg.epsilons, thr, prev, cfg.relativistic))

        sim.run(cfg.t_final, cb)
        if out is not None:
            write_csv(records, out / f"diagnostics_{grid.n_x}.csv", cfg.epsilons)
        finals.append(sim.f)
        rows.append({"n_x": grid.n_x, "n_v1": grid.n_v1, "n_v2": grid.n_v2, "dx": grid.dx, "energy_drift": energy_drift(records)})
        grid = grid.refined(2)
    for k, row in enumerate(rows):
        row["refinement_error"] = refinement_error(finals[k], finals[k + 1]) if k + 1 < len(rows) else math.nan
    for k in range(1, len(rows)):
        for key, order in (("energy_drift", "energy_order"), ("refinement_error", "error_order")):
            a, b_ = rows[k - 1][key], rows[k][key]
            rows[k][order] = math.log2(a / b_) if a > 0 and b_ > 0 else math.nan
    rows[0]["energy_order"] = rows[0]["error_order"] = math.nan
    if out is not None:
        cols = ("n_x", "n_v1", "n_v2", "dx", "energy_drift", "refinement_error", "energy_order", "error_order")
        lines = [",".join(cols)] + [",".join(repr(r[c]) if isinstance(r[c], float) else str(r[c]) for c in cols) for r in rows]
        (out / "convergence.csv").write_text("\n".join(lines) + "\n")
    return rows


def run_convergence(config: RunConfig, out: Path) -> dict:
    rows = convergence_study(config, out)
    orders = [r["energy_order"] for r in rows[1:]]
    return {"levels": len(rows), "energy_orders": orders, "error_orders": [r["error_order"] for r in rows[1:-1]]}


MODE_RUNNERS: dict[str, Callable[[RunConfig, Path], dict]] = {
    "full": run_full,
    "vp1d": run_vp1d,
    "cross-validate": run_cross_validate,
    "orbit-audit": run_orbit_audit,
    "convergence-study": run_convergence,
}


def run(config: RunConfig, out_dir=None, threads: int | None = None) -> int:
    """Execute a configured run; returns the process exit code.

    Errors from this package become a nonzero exit code with the reason in
    ``status.json``; anything else propagates.
    """
    out = Path(out_dir or config.output_dir or "run")
    out.mkdir(parents=True, exist_ok=True)
    set_num_threads(threads if threads else (os.cpu_count() or 1))
    _write_json(out / "manifest.json", manifest(config))
    (out / "config.ini").write_text(config.to_ini())
    status: dict = {"mode": config.mode}
    try:
        with np.errstate(all="ignore"):
            summary = MODE_RUNNERS[config.mode](config, out)
        status.update(status="ok", exit_code=0, reason="", summary=summary)
    except VMError as exc:
        log.error("%s", exc)
        status.update(status="aborted", exit_code=exc.exit_code, reason=exc.reason, message=str(exc))
    _write_json(out / "status.json", _jsonable(status))
    return status["exit_code"]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


# ---------------------------------------------------------------------------
# plot data


def _header(quantity: str, columns: list[str], source: str, extra: str = "") -> str:
    lines = [f"# quantity: {quantity}", f"# source: {source}", f"# columns: {' '.join(columns)}"]
    if extra:
        lines.append(f"# {extra}")
    return "\n".join(lines) + "\n"


def _seps_column(header: list[str], eps_text: str) -> str:
    try:
        eps = float(eps_text)
    except ValueError:
        raise ConfigError(f"unknown quantity: bad epsilon {eps_text!r}") from None
    for name in header:
        if name.startswith("seps_") and float(name[5:]) == eps:
            return name
    raise ConfigError(f"unknown quantity: epsilon {eps} was not monitored in this run")


def emit_plot_data(run_dir, quantity: str, out_path=None) -> Path:
    """Write a whitespace-separated columnar file for ``quantity``.

    Accepted names: any diagnostics column, ``total_energy``,
    ``seps_sup:<eps>``, ``<field>_xt`` for rho, j1, j2, E1, E2, B, A, and
    the marginals ``f_xv1`` (integral over v2) and ``f_xv2``.
    """
    run_dir = Path(run_dir)
    safe = quantity.replace(":", "_").replace("/", "_")
    out_path = Path(out_path) if out_path else run_dir / f"plot_{safe}.dat"
    diag_path = run_dir / "diagnostics.csv"

    if quantity.endswith("_xt") and quantity[:-3] in PROFILE_FIELDS or quantity in MARGINALS:
        prof_path = run_dir / "profiles.npz"
        if not prof_path.exists():
            raise ConfigError(f"no profile data in {run_dir}")
        with np.load(prof_path) as data:
            t = data["t"]
            if quantity in MARGINALS:
                vname = "v1" if quantity == "f_xv1" else "v2"
                x, v, vals = data["x"], data[vname], data[quantity]
                T, Xg, Vg = np.meshgrid(t, x, v, indexing="ij")
                table = np.column_stack([T.ravel(), Xg.ravel(), Vg.ravel(), vals.ravel()])
                cols = ["t", "x", vname, quantity]
                extra = "one row per (t, x, %s) node, t slowest" % vname
            else:
                name = quantity[:-3]
                x, vals = data["x"], data[name]
                T, Xg = np.meshgrid(t, x, indexing="ij")
                table = np.column_stack([T.ravel(), Xg.ravel(), vals.ravel()])
                cols = ["t", "x", name]
                extra = "one row per (t, x) node, t slowest"
        source = "profiles.npz"
    else:
        if not diag_path.exists():
            raise ConfigError(f"no diagnostics in {run_dir}")
        diag = read_csv(diag_path)
        header = list(diag)
        t = diag["time"]
        if quantity == "total_energy":
            col, vals = "total_energy", diag["kinetic_energy"] + diag["field_energy"]
        elif quantity.startswith("seps_sup:"):
            col = _seps_column(header, quantity.split(":", 1)[1])
            vals = diag[col]
            col = quantity.replace(":", "_")
        elif quantity in header and quantity != "time":
            col, vals = quantity, diag[quantity]
        else:
            raise ConfigError(f"unknown quantity {quantity!r}")
        table = np.column_stack([t, vals])
        cols = ["t", col]
        extra = ""
        source = "diagnostics.csv"
    with open(out_path, "w") as fh:
        fh.write(_header(quantity, cols, source, extra))
        np.savetxt(fh, table, fmt="%.17g")
    return out_path
