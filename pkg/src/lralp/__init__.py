"""Linearly relaxed approximate linear programming for discounted finite MDPs."""

from .alp import (
    BasisMatrix,
    LpInfeasible,
    LpUnbounded,
    approximation_error,
    hierarchical_basis,
    indicator_basis,
    j_star_alp,
    polynomial_basis,
    solve_alp,
)
from .bench_queue import QueueConfig, build_queue_mdp, lookahead_policy, run_experiment
from .constraint_select import (
    ConicCover,
    conic_membership,
    geometric_distribution,
    greedy_conic_cover,
    ideal_occupancy_distribution,
    sample_constraints,
    selection_W,
    separable_cover,
)
from .lp_backend import LpOutcome, LpProblem, LpStatus, NumericallyStalled, solve_lp
from .mdp_core import Mdp, bellman_operator, policy_value, random_mdp, solve_exact, stability_coefficient
from .relaxation import (
    BoundReport,
    HypothesisViolation,
    ReductionMatrix,
    evaluate_theorem1,
    evaluate_theorem2,
    full_selection,
    gamma_hat_apply,
    gamma_hat_fixed_point,
    j_star_lralp,
    solve_lralp,
)

__version__ = "0.1.0"
