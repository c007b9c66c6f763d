"""Semi-Lagrangian solver and diagnostics for the 1.5D Vlasov-Maxwell system."""

__version__ = "0.1.0"

from .advection import get_num_threads, interpolate_1d, set_num_threads, shift_along_axis
from .characteristics import (
    AnalyticHistory,
    CharacteristicState,
    FieldHistory,
    integrate_characteristic,
    min_distance_to_light_speed,
    orbit_lattice,
    trace_characteristics,
    v2A_drift,
)
from .config import RunConfig, load_config, parse_config
from .diagnostics import DiagnosticsRecord, energy_drift, record, seps_gradient_monitor
from .errors import (
    AlignmentError,
    CFLError,
    ConfigError,
    EscapeError,
    GridError,
    NeutralityError,
    NumericalError,
    SupportError,
    SymmetryError,
    VMError,
)
from .fields import (
    FieldState,
    advance_E1_ampere,
    advance_fields_lightcone,
    compute_A,
    gauss_residual,
    init_E1_from_gauss,
    sample_field_profile,
)
from .phase_space import (
    Background,
    DistributionFunction,
    Moments,
    PhaseGrid,
    ProfileSpec,
    compute_moments,
    make_background,
    make_grid,
    neutralize,
    read_snapshot,
    sample_initial_distribution,
    velocity_map,
    write_snapshot,
)
from .reduction import VPState, cross_validate, step_vp
from .runner import emit_plot_data, run
from .vlasov_solver import ForceField, Simulation, SolverOptions, initial_state, step_strang
