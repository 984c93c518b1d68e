from .sets import ElementSet
from .oracle import (
    BasePoint,
    SubmodularOracle,
    brute_force_sfm,
    check_base_membership,
    greedy_linear_maximize,
    lovasz_extension,
    submodularity_violations,
)
from .solver import (
    FrankWolfeSolver,
    MinNormPointSolver,
    SolveReport,
    SolverState,
    conditional_gradient_step,
    dual_value,
    duality_gap,
    min_norm_point,
    pav_refine,
    primal_value,
)
from .screening import (
    GapCertificate,
    IaesReport,
    ScreeningMode,
    ScreeningState,
    contract,
    iaes_solve,
    screen_pass,
)
