"""Budget-constrained welfare-maximizing pooled testing."""

from .core import (Agent, DynamicPlan, HealthVector, History, Instance,
                   Outcome, PlanNode, Pool, generate_instance, make_pool,
                   plan_depth, plan_pools, realization_probability,
                   realized_welfare, static_plan, validate_plan)
from .errors import (CapacityError, InconsistentHistoryError,
                     NothingToTestError, ParameterError, PoolwiseError,
                     StateError, StructuralError)
from .evaluation import EvalReport, MonteCarloConfig, evaluate_exact, evaluate_monte_carlo
from .harness import (ExperimentSpec, SummaryRow, budget_sweep, load_experiment_spec,
                      run_experiment)
from .inference import (BeliefState, GibbsConfig, apply_history, evidence_probability,
                        exact_posterior, gibbs_posterior)
from .planning import (PolicyKind, belief_for, best_single_test, exact_non_overlapping_plan,
                       exact_overlapping_static_plan, greedy_dynamic_plan, greedy_dynamic_step,
                       greedy_non_overlapping_plan, greedy_step_with_value, non_pooled_plan,
                       optimal_dynamic_plan, static_local_search_plan)
from .serialize import (dumps_canonical, history_from_list, history_to_list,
                        instance_from_dict, instance_to_dict, load_history, load_instance,
                        load_plan, plan_from_dict, plan_to_dict, save_history,
                        save_instance, save_plan)

__all__ = [
    "Agent", "DynamicPlan", "HealthVector", "History", "Instance", "Outcome",
    "PlanNode", "Pool", "generate_instance", "make_pool", "plan_depth",
    "plan_pools", "realization_probability", "realized_welfare", "static_plan",
    "validate_plan",
    "CapacityError", "InconsistentHistoryError", "NothingToTestError",
    "ParameterError", "PoolwiseError", "StateError", "StructuralError",
    "EvalReport", "MonteCarloConfig", "evaluate_exact", "evaluate_monte_carlo",
    "ExperimentSpec", "SummaryRow", "budget_sweep", "load_experiment_spec",
    "run_experiment",
    "BeliefState", "GibbsConfig", "apply_history", "evidence_probability",
    "exact_posterior", "gibbs_posterior",
    "PolicyKind", "belief_for", "best_single_test", "exact_non_overlapping_plan",
    "exact_overlapping_static_plan", "greedy_dynamic_plan", "greedy_dynamic_step",
    "greedy_non_overlapping_plan", "greedy_step_with_value", "non_pooled_plan",
    "optimal_dynamic_plan", "static_local_search_plan",
    "dumps_canonical", "history_from_list", "history_to_list", "instance_from_dict",
    "instance_to_dict", "load_history", "load_instance", "load_plan",
    "plan_from_dict", "plan_to_dict", "save_history", "save_instance", "save_plan",
]
