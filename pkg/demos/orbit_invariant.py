"""Characteristics through a two-stream field history and the v2 + A invariant."""

import numpy as np

from vm1d2v import FieldHistory, Simulation, initial_state, make_grid, orbit_lattice, trace_characteristics

for n_x in (64, 128):
    grid = make_grid(((-8, 8), (-1.5, 1.5), (-1.5, 1.5)), (n_x, n_x // 2, n_x // 2))
    f0, fields0, b = initial_state(grid, "two-stream")
    sim = Simulation(f0, fields0, b, keep_history=True).run(5.0)
    history = FieldHistory(sim.history)
    if n_x == 64:
        lattice = orbit_lattice(f0, 5)
    tr = trace_characteristics(history, 0.0, *lattice, s_target=5.0)
    inv = tr.V2 + np.array([history.evaluate(s, X)[3] for s, X in zip(tr.s, tr.X)])
    gap = np.min(np.abs(np.abs(tr.V1) - 1.0))
    print(f"n_x = {n_x:4d}: max |d(v2 + A)| = {np.abs(inv - inv[0]).max():.3e}, min ||V1| - 1| = {gap:.3f}")
