"""Sensor scheduling for optimal observability of hidden Markov processes.

Belief filtering, exact and Monte Carlo estimation entropy, and an
average-cost policy-iteration solver over a discretized belief simplex.
"""

from .belief import (
    Belief,
    CostFunction,
    ObservationPredictive,
    ZeroProbabilityObservation,
    cost,
    entropy,
    eta,
    transition_support,
    zeta,
)
from .exact import (
    CesaroResult,
    HorizonTooLarge,
    cesaro_estimation_entropy,
    conditional_entropy_exact,
    conditional_entropy_oracle,
    entropy_rate_exact,
)
from .model import (
    PomdpModel,
    StationaryDistribution,
    load_model,
    model_from_dict,
    normalize_model,
    save_model,
    stationary_distribution,
    validate_model,
)
from .policies import ConstantPolicy, GridLookupPolicy, ThresholdPolicy
from .simulate import (
    AverageCostEstimate,
    TrajectoryRecord,
    estimate_average_cost,
    sample_trajectory,
    write_trajectory_csv,
)
from .solver import (
    ActionKernel,
    BeliefGrid,
    GridPolicy,
    GridTooLarge,
    MultichainUnresolved,
    PiaReport,
    PoissonSolution,
    apply_kernel,
    build_action_kernel,
    build_all_kernels,
    build_grid,
    evaluate_grid_policy,
    greedy_myopic_policy,
    policy_improvement,
    policy_iteration,
    project,
    push_measure,
    solve_poisson,
)
from .diagnostics import (
    ContractionReport,
    InvariantMeasureEstimate,
    WeightFunction,
    check_average_cost_identity,
    check_contraction,
    estimate_invariant_measure,
    model_positivity_report,
)

__version__ = "0.1.0"
