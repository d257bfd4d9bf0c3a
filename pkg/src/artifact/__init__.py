"""Exact joint-tail asymptotics for heavy-tailed vectors with normal-copula
dependence, with a seeded Monte Carlo verification harness.

Layering: linalg (validated correlation matrices, index subsets, Cholesky)
-> qp (the structural box-constrained quadratic program behind every tail
constant) -> gaussian (normal special functions, orthant probabilities, the
tail constant Upsilon) -> asymptotics (decay laws for rectangular,
at-least-i, and box-complement tail sets; cone analysis; the bivariate
normal-versus-Pareto comparison) -> simulate (sampling, Hill curves,
verification tables) -> cli (config-driven batch front end).
"""

from .asymptotics import (
    ASYMPTOTIC_ONLY,
    GAMMA_TIE_REL,
    PARETO_EXACT,
    AsymptoticEstimate,
    AtLeastI,
    BivariateComparison,
    ComplementBox,
    ConeAnalysis,
    ContributingSet,
    MarginalSpec,
    Rectangular,
    TailCoefficients,
    TailSetSpec,
    UnsupportedDegeneracy,
    asymptotic_estimate,
    bivariate_comparison,
    cone_analysis,
    marginal_tail,
    mu_i_at_least,
    mu_i_rectangular,
    mu_level_one,
    rect_tail_asymptotic,
    subset_coefficients,
    tail_probability,
)
from .gaussian import (
    AsymptoticRegimeWarning,
    OrthantEstimate,
    QuantileExpansion,
    UpsilonResult,
    gaussian_joint_tail,
    joint_tail_quadrature,
    orthant_probability,
    rv_quantile_expansion,
    std_normal_cdf,
    std_normal_pdf,
    std_normal_quantile,
    upsilon,
)
from .linalg import (
    CholeskyFactor,
    CorrelationMatrix,
    IndexSubset,
    NotPositiveDefinite,
    principal_submatrix,
    solve_spd,
    spd_factorize,
    submatrix,
)
from .qp import (
    BOUNDARY_EPS,
    H_TOLERANCE,
    QpSolution,
    ResidualReport,
    SolverInconsistency,
    SubsetQpSolver,
    brute_force_qp,
    kkt_residuals,
    solve_qp,
)
from .simulate import (
    BLOCK_ROWS,
    LOW_HIT_THRESHOLD,
    ConditionalCurve,
    Coordinate,
    EmpiricalTail,
    HillCurve,
    MaxAll,
    MinOverSet,
    OrderStatistic,
    SimulationConfig,
    VerificationRow,
    VerificationTable,
    conditional_exceedance_curves,
    default_k_grid,
    derived_series,
    empirical_tail,
    hill_estimator,
    sample_rvgc,
    verify_asymptotics,
)

__version__ = "0.1.0"

__all__ = [
    "ASYMPTOTIC_ONLY",
    "AsymptoticEstimate",
    "AsymptoticRegimeWarning",
    "AtLeastI",
    "BLOCK_ROWS",
    "BOUNDARY_EPS",
    "BivariateComparison",
    "CholeskyFactor",
    "ComplementBox",
    "ConditionalCurve",
    "ConeAnalysis",
    "ContributingSet",
    "Coordinate",
    "CorrelationMatrix",
    "EmpiricalTail",
    "GAMMA_TIE_REL",
    "H_TOLERANCE",
    "HillCurve",
    "IndexSubset",
    "LOW_HIT_THRESHOLD",
    "MarginalSpec",
    "MaxAll",
    "MinOverSet",
    "NotPositiveDefinite",
    "OrderStatistic",
    "OrthantEstimate",
    "PARETO_EXACT",
    "QpSolution",
    "QuantileExpansion",
    "Rectangular",
    "ResidualReport",
    "SimulationConfig",
    "SolverInconsistency",
    "SubsetQpSolver",
    "TailCoefficients",
    "TailSetSpec",
    "UnsupportedDegeneracy",
    "UpsilonResult",
    "VerificationRow",
    "VerificationTable",
    "asymptotic_estimate",
    "bivariate_comparison",
    "cone_analysis",
    "conditional_exceedance_curves",
    "default_k_grid",
    "derived_series",
    "empirical_tail",
    "gaussian_joint_tail",
    "hill_estimator",
    "joint_tail_quadrature",
    "marginal_tail",
    "mu_i_at_least",
    "mu_i_rectangular",
    "mu_level_one",
    "orthant_probability",
    "principal_submatrix",
    "rect_tail_asymptotic",
    "rv_quantile_expansion",
    "sample_rvgc",
    "solve_qp",
    "solve_spd",
    "spd_factorize",
    "std_normal_cdf",
    "std_normal_pdf",
    "std_normal_quantile",
    "submatrix",
    "subset_coefficients",
    "tail_probability",
    "upsilon",
    "verify_asymptotics",
    "brute_force_qp",
    "kkt_residuals",
]
