"""Sojourn times of Gaussian processes with a linear trend: simulation,
Berman-type constants, exact asymptotics and Monte Carlo validation."""
from .asymptotics import (
    AsymptoticResult,
    LevyExponent,
    asymptotic_inverse,
    brownian_sojourn_tail_exact,
    evaluate_asymptotic,
    finite_horizon_geometry,
    infinite_horizon_geometry,
    levy_alpha,
    levy_factorized_tail,
    log_normal_tail,
    normal_tail,
    passage_limit_law,
    resolve_scaling,
    rv_tail_integral,
    self_similar_geometry,
    special_constant,
    theta_integral,
)
from .berman import (
    BermanEstimate,
    BermanSpec,
    BermanStore,
    PowerField,
    TableField,
    ZeroField,
    berman_hat,
    berman_interval,
    berman_limit,
    line_process_hat_quadrature,
    zstar_weight,
)
from .errors import *  # noqa: F401,F403
from .functions import CustomFunction, PowerLog, integrated_sigma2
from .models import (
    BrownianDrift,
    FBm,
    GridSpec,
    LineProcess,
    SelfSimilar,
    StationaryIncrements,
    ZeroProcess,
    build_grid,
    covariance,
    covariance_matrix,
    parse_model,
    simulate,
    variance,
)
from .montecarlo import (
    GridPolicy,
    TailEstimate,
    convergence_study,
    estimate_passage_law,
    estimate_tail,
    estimate_tail_table,
    read_report,
    truncation_grid,
    write_report,
)
from .sojourn import SojournProblem, first_passage, normalize_passage, sojourn_time

__version__ = "0.1.0"
