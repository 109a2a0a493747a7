"""Kinetic and Keller-Segel chemotaxis forward models with Bayesian
inversion of tumbling-kernel parameters, and the numerical study of how the
two posteriors merge as the kinetic scaling parameter shrinks."""

from ._version import __version__
from .velocity import VelocityGrid, Equilibrium, build_velocity_grid, equilibrium, quadrature
from .kernels import (
    AdmissibilityReport,
    KernelParams,
    TumblingMatrix,
    assemble_tumbling_matrix,
    check_admissible,
    evaluate_k0,
    evaluate_k1,
)
from .macro import (
    CellProblemError,
    CellSolution,
    MacroCoefficients,
    compute_macro,
    solve_cell_kappa,
    solve_cell_theta,
    solve_cells,
)
from .kinetic import (
    CompositeProfile,
    ConstantProfile,
    GaussBump,
    KineticState,
    PolyBump,
    SpatialGrid,
    macro_density,
    make_initial_kinetic,
    solve_kinetic,
    step_kinetic,
)
from .keller_segel import MacroState, restrict_initial, solve_ks
from .measurement import (
    BumpTestFunction,
    DataSet,
    ForwardConfig,
    MeasurementSetup,
    generate_data,
    g_chem,
    g_ks,
    measure,
)
from .bayes import (
    ForwardModel,
    PosteriorGrid,
    PriorSpec,
    build_posterior,
    hellinger,
    kl_divergence,
    log_likelihood,
)
from .experiments import (
    ConfigError,
    ExperimentConfig,
    SweepResult,
    default_config,
    emit_report,
    run_forward_convergence,
    run_posterior_sweep,
)

__all__ = [name for name in dir() if not name.startswith("_")]
