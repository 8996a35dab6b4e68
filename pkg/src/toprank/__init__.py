"""Bipartite ranking criteria focused on the top of the list.

Empirical criteria (mass-constrained classification error, local AUC,
truncated AUC, local ranking error, generalized Wilcoxon statistics),
population counterparts under synthetic models, empirical risk minimization
and the Monte Carlo studies built on them.
"""

from .classify import (
    DecompositionSample,
    MassConstrainedRisk,
    L_fixed_threshold,
    decompose,
    hat_K,
    hat_K_via_signed_ranks,
    hat_L,
    lambda_remainder,
    sigma_sq,
    z_term,
)
from .core import (
    GLOBAL,
    Dataset,
    FiniteMember,
    Linear,
    Piece,
    PiecewiseLinear1D,
    PiecewiseMonotone1D,
    Rate,
    SeedSpec,
    child_stream,
    evaluate,
    identity,
    model_from_dict,
    model_to_dict,
    read_csv,
    score_dataset,
    write_csv,
)
from .edf import EmpiricalDistribution, empirical_cdf, quantile
from .erm import (
    Criterion,
    ErmProblem,
    ErmResult,
    FiniteFamily,
    LinearFamily,
    PiecewiseFamily,
    criterion_value,
    erm,
    erm_finite,
    erm_linear,
    erm_piecewise,
)
from .errors import ConsistencyError, InputError, NumericalError, ToprankError
from .experiments import (
    Band,
    decomposition_study,
    exact_residuals,
    identity_suite,
    population_residuals,
    rate_study,
    reflection_family,
    two_window_family,
)
from .oracle import (
    GaussianMixtureMarginal,
    SyntheticModel,
    UniformMarginal,
    bayes_report,
    excess_risk,
    model_from_config,
    optimal_scoring,
    sample,
    true_quantile,
    true_report,
    uniform_model,
    w_constant,
)
from .rankcrit import (
    CriterionReport,
    full_report,
    hat_auc,
    hat_locauc,
    hat_M,
    hat_R_local,
    roc_points,
    t_local,
    t_wilcoxon,
    trunc_auc,
    w_hat,
)

__version__ = "0.1.0"
