"""accurt: matrix exponential actions exp(-tA)v for large sparse nonsymmetric
A by shift-and-invert Krylov iteration with residual-time (RT and AccuRT)
restarting, adaptive shift halving, and single-factorization reuse."""

from .config import ConfigError, RunConfig
from .dense import expm, expm_action, phi, spectral_norm
from .krylov import (
    POLYNOMIAL,
    SAI,
    ArnoldiState,
    ResidualSamples,
    arnoldi_build,
    arnoldi_step_polynomial,
    arnoldi_step_sai,
    assemble_iterate,
    back_transform,
    explicit_residual_norm,
    explicit_residual_vector,
    extend_after_breakdown,
    omega_k,
    projected_matrix,
    projected_solution,
    residual_bound,
    residual_norm,
    residual_samples,
    start_state,
)
from .mmio import read_matrix_market, write_matrix_market
from .oracle import OracleError, Reference, reference_solution, true_error
from .problems import (
    GridSpec,
    build_problem,
    conv_diff_initial,
    convection_diffusion_matrix,
    convection_matrix,
    maxwell_block_slices,
    maxwell_initial,
    maxwell_yee_matrix,
)
from .restart import (
    AccuRTConfig,
    EngineSolveError,
    RestartRecord,
    RunReport,
    StagnationError,
    find_delta,
    resume_with_gamma,
    run,
)
from .solvers import (
    ConvergenceError,
    LinearOperator,
    SolveStats,
    gmres_restarted,
    prefer_preconditioner,
    richardson,
    spectral_radius_estimate,
)
from .sparse import (
    Factorization,
    SingularMatrixError,
    SparseMatrix,
    ilut_factorize,
    lu_factorize,
    shifted,
    solve,
    spmv,
)

__version__ = "0.1.0"
