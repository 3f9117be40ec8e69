"""Solvers for discrete and continuous two-point problems of quadratic
Lagrangians: windowed delay-difference optimality systems, block-companion
shooting, pseudo-periodic modal expansion, and convergence studies."""

from .errors import (
    AlignmentError,
    ConfigError,
    DegenerateSpectrumError,
    InvalidArgumentError,
    NotDiagonalizableError,
    NumericFailureError,
    QuadlagError,
    ResonantContinuousProblemError,
    ResonantDiscreteProblemError,
    ResonantProblemError,
    SchemeUnstableError,
    SingularCoefficientError,
    SolventExtractionError,
    UnsupportedConfigurationError,
)
from .model import (
    BoxOperator,
    Grid,
    GridFunction,
    QuadraticLagrangian,
    ValidationReport,
    apply_box,
    discrete_action,
    eval_lagrangian,
    make_rs_box,
    reverse_box,
    validate_lagrangian,
)
from .linalg import eig, matfun, principal_sqrt, vandermonde_solve
from .kernels import active_kernel, iterate_recurrence
from .discrete import (
    CompanionSystem,
    SafetyInterval,
    ShootingResult,
    SplitOscillatorSolution,
    box_one,
    companion,
    interior_blocks,
    is_split,
    iterate_interior,
    optimality_row,
    residual_del,
    safety_interval,
    shooting_determinant,
    solve_dirichlet,
    solve_free,
    split_solve_oscillator,
)
from .continuous import (
    ContinuousSolution,
    F_vector,
    Z_vector,
    eval_z,
    modal_content,
    nonresonant,
    residual_cel,
    sin_margin,
    solve_cel,
    solve_omega,
    solvent_residual,
    z_limit,
)
from .spectral import (
    ModalBank,
    ModalExpansion,
    SpectrumReport,
    chain_companion,
    chain_phases,
    cresson_spectrum,
    extend_pseudo_periodic,
    modal_expansion,
    rr_phases,
    spectrum,
    theta_matrix,
)
from .converge import (
    ConvergenceReport,
    ConvergenceRow,
    ConvergenceScenario,
    bound_terms,
    j_reduction_check,
    limit_phase_gap,
    odd_M_check,
    resonance_scan,
    run_scenario,
    sup_error,
)

__version__ = "1.0.0"

__all__ = [name for name in dir() if not name.startswith("_")]
