"""Finite-difference laboratory for the nonlocal Kirchhoff problem

    -M(int |grad u|^2) Lap u = f(x, u, grad u)  in Omega,   u = 0 on the boundary,

solved through gradient truncation, barrier freezing and a sublinear penalty,
with numerical checks of the barrier inequalities and operator structure.
"""

from .applications import App1Params, App2Params, app1_build, app2_build, run_application
from .errors import (
    BracketError,
    DomainError,
    GradientBoundError,
    GridMismatchError,
    InfeasibleError,
    InvalidDomainError,
    KirchhoffLabError,
    NoConvergenceError,
    OrderingError,
)
from .grid import (
    Grid,
    ScalarField,
    VectorField,
    apply_neg_laplacian,
    build_grid,
    field_norms,
    node_gradient,
    read_field_csv,
    write_field_csv,
)
from .linalg import EigenPair, LinearOperator, cg_solve, principal_eigenpair, solve_poisson_unit
from .nonlinearity import (
    BarrierPair,
    KirchhoffTerm,
    ReactionSpec,
    TruncationConfig,
    app1_reaction,
    app2_reaction,
    clamp_grad,
    constant_reaction,
    eval_f_R,
    eval_gamma_R,
    eval_M,
    eval_M_hat,
    eval_z_R,
)
from .ordering import check_order, probe_operator_properties, verify_subsolution, verify_supersolution
from .solver import SolveReport, SolverConfig, kirchhoff_fixed_point, semilinear_picard, solve_auxiliary_B, solve_P

__version__ = "0.1.0"
