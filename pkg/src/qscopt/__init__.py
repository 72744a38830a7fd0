"""High-precision minimization of quasi-self-concordant losses and
(1+eps)-approximate l-infinity regression via IRLS with row-weight
overestimates."""

from .core_linalg import (
    EnergySolve,
    ProblemMatrix,
    ResistanceVector,
    constrained_bilinear,
    constrained_weighted_ls,
    energy,
    leverage_scores_exact,
    leverage_scores_sketched,
    solve_weighted_ls,
)
from .estimators import LinfRegression, QuasiSelfConcordantRegression
from .lewis_weights import LewisOverestimate, approx_lewis, verify_overestimate
from .linf import LinfInstance, SubsolverOutcome, homogenize, linf_regress, subsolver
from .qsc import (
    QscFunction,
    QscProblem,
    ResidualOutcome,
    gradient_pieces,
    lp_l2_loss,
    newton_baseline,
    objective,
    optimize,
    residual_solver,
    residual_solver_underdetermined,
    residual_value,
)

__version__ = "0.1.0"

__all__ = [
    "EnergySolve",
    "ProblemMatrix",
    "ResistanceVector",
    "constrained_bilinear",
    "constrained_weighted_ls",
    "energy",
    "leverage_scores_exact",
    "leverage_scores_sketched",
    "solve_weighted_ls",
    "LewisOverestimate",
    "approx_lewis",
    "verify_overestimate",
    "LinfInstance",
    "SubsolverOutcome",
    "homogenize",
    "linf_regress",
    "subsolver",
    "QscFunction",
    "QscProblem",
    "ResidualOutcome",
    "gradient_pieces",
    "lp_l2_loss",
    "newton_baseline",
    "objective",
    "optimize",
    "residual_solver",
    "residual_solver_underdetermined",
    "residual_value",
    "LinfRegression",
    "QuasiSelfConcordantRegression",
]
