"""Matrix-free solvers for bound-constrained nonconvex minimisation.

Scaled two-metric projection, projected Newton-CG with Capped CG and a
randomized Lanczos minimum eigenvalue oracle, and an NMF benchmark harness.
"""

from .problem import (
    BoundSpec,
    DimensionMismatch,
    DimensionTooLarge,
    InfeasiblePoint,
    IterationRecord,
    ObjectiveOracle,
    OracleCounts,
    ParameterOutOfRange,
    ProjNewtonError,
    SolverConfig,
    SolverReport,
    Status,
    StepKind,
    finite_diff_check,
    validate_config,
)
from .geometry import (
    CheckResult,
    DiagScaling,
    IndexPartition,
    check_eps1o,
    check_eps2o,
    near_bound_masks,
    pncg_partition,
    project,
    projected_gradient,
    projnorm,
    residual,
    s_scaling,
    two_metric_partition,
    z_scaling,
)
from .capped_cg import NC, SOL, CappedCGError, CappedCgOutcome, IterCapExceeded, MaskedHvp, ZeroGradient, capped_cg, rescale_nc
from .meo import CERTIFICATE, NEGATIVE_CURVATURE, MeoResult, MeoTimeout, estimate_norm, meo, meo_budget
from .two_metric import ScalingStrategy, theorem31_budget, two_metric_solve
from .pncg import PncgState, adapt_zeta_hat, decrease_constants, kpncg_budget, pncg_solve
from .pgrad import pgrad_solve
from .nmf import (
    NmfProblem, Rank1SolveFailed, Saddle, SyntheticData, build_saddle, gen_synthetic, initial_point, nmf_oracle,
    pgrad_nmf, polish_rank1, replicate_rank1,
)
from .quadratic import QuadraticProblem, random_feasible_point, random_quadratic

__version__ = "0.1.0"

__all__ = [
    "BoundSpec",
    "DimensionMismatch",
    "DimensionTooLarge",
    "InfeasiblePoint",
    "IterationRecord",
    "ObjectiveOracle",
    "OracleCounts",
    "ParameterOutOfRange",
    "ProjNewtonError",
    "SolverConfig",
    "SolverReport",
    "Status",
    "StepKind",
    "finite_diff_check",
    "validate_config",
    "CheckResult",
    "DiagScaling",
    "IndexPartition",
    "check_eps1o",
    "check_eps2o",
    "near_bound_masks",
    "pncg_partition",
    "project",
    "projected_gradient",
    "projnorm",
    "residual",
    "s_scaling",
    "two_metric_partition",
    "z_scaling",
    "NC",
    "SOL",
    "CappedCGError",
    "CappedCgOutcome",
    "IterCapExceeded",
    "MaskedHvp",
    "ZeroGradient",
    "capped_cg",
    "rescale_nc",
    "CERTIFICATE",
    "NEGATIVE_CURVATURE",
    "MeoResult",
    "MeoTimeout",
    "estimate_norm",
    "meo",
    "meo_budget",
    "ScalingStrategy",
    "theorem31_budget",
    "two_metric_solve",
    "PncgState",
    "adapt_zeta_hat",
    "decrease_constants",
    "kpncg_budget",
    "pncg_solve",
    "pgrad_solve",
    "NmfProblem",
    "Rank1SolveFailed",
    "build_saddle",
    "gen_synthetic",
    "initial_point",
    "nmf_oracle",
    "pgrad_nmf",
    "polish_rank1",
    "replicate_rank1",
    "Saddle",
    "SyntheticData",
    "QuadraticProblem",
    "random_feasible_point",
    "random_quadratic",
]
