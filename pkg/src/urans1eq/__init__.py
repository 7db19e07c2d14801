"""Two-dimensional URANS simulator for the Prandtl one-equation model with
static, kinematic and geometric turbulence length scales, plus numerical
checks of the model's structural properties."""
from .closure import (
    ClosureConfig,
    decay_closed_form,
    decay_ode_oracle,
    dissipation_density,
    eddy_viscosity,
    geometric_length_scale,
    initial_k_duct,
    initial_k_from_l0,
    k_step,
    kinematic_length_scale,
    length_scale,
    static_length_scale,
    turbulent_viscosity,
)
from .flowsolver import (
    CFLError,
    FlowSolver,
    FlowState,
    SolverConfig,
    body_force_annulus,
    read_checkpoint,
    write_checkpoint,
)
from .grid import Circle, ConfigurationError, Grid, VectorField, deformation_tensor_magsq, make_grid
from .linsolve import SolverError
from .runner import RunManifest, RunResult, ScenarioConfig, compare, run, sweep
from .statistics import (
    FlowScales,
    TimeAverager,
    compute_scales,
    dissipation_rate,
    effective_viscosity,
    intensity,
    taylor_microscale,
    time_average,
    viscosity_ratio,
)

__version__ = "0.1.0"
