"""Two-stream run through the library API, printing conservation diagnostics.

    python3 demos/two_stream.py [n_x]
"""

import sys

from vm1d2v import Simulation, initial_state, make_grid, record

n_x = int(sys.argv[1]) if len(sys.argv) > 1 else 64
grid = make_grid(((-8, 8), (-1.5, 1.5), (-1.5, 1.5)), (n_x, n_x // 2, n_x // 2))
f0, fields0, b = initial_state(grid, "two-stream")
records = []


def observe(sim):
    records.append(record(sim.f, sim.fields, b, previous=records[-1] if records else None))


Simulation(f0, fields0, b).run(5.0, observe)

e0, q0 = records[0].total_energy, records[0].total_charge
print(f"{'t':>6} {'energy drift':>13} {'charge drift':>13} {'gauss res':>10} {'seps(0.1)':>10} {'Q':>6}")
stride = max(1, len(records) // 10)
for r in records[::stride] if (len(records) - 1) % stride == 0 else records[::stride] + records[-1:]:
    print(
        f"{r.time:6.3f} {abs(r.total_energy - e0) / e0:13.3e} {abs(r.total_charge - q0) / q0:13.3e} "
        f"{r.gauss_residual:10.3e} {r.seps_grad_sup[0.1]:10.4f} {r.Q_support:6.3f}"
    )
