"""Slot-ordering search: plan the fill order of masked slots by tree search.

The package splits into the MDP core (states, proposals, transitions), the
infill-model abstraction with a synthetic oracle-checkable family, the search
itself, reference planners plus a brute-force oracle, run analysis, and a CLI
for config-driven experiments.
"""

from .core import (
    DecisionRecord,
    PlanTrace,
    SearchConfig,
    SlotAction,
    SlotProposal,
    SlotState,
    admissible_actions,
    apply_action,
)
from .errors import (
    InadmissibleAction,
    InvalidConfig,
    ModelUnavailable,
    PlanAborted,
    SlotPlanError,
    TooLarge,
)
from .model import (
    CachedModel,
    ConstantModel,
    InfillModel,
    ProposalCache,
    RemoteModel,
    SyntheticInstance,
    SyntheticModel,
    cached_propose,
    count_topological_orders,
    generate_instance,
    instance_from_jsonable,
    instance_to_jsonable,
    is_topological,
    register_remote_instance,
    relabel_slots,
)
from .mcts import (
    RolloutOutcome,
    SearchNode,
    backpropagate,
    evaluate_leaf,
    expand,
    plan,
    puct_score,
    robust_action,
    rollout,
    rollout_distribution,
    run_simulations,
    search_step,
    select,
    select_child,
)
from .baselines import (
    PlannerKind,
    oracle_exhaustive,
    plan_greedy_confidence,
    plan_random,
    plan_sequential,
    run_planner,
)
from .analysis import (
    RunRecord,
    concentration,
    root_entropy_bits,
    sequentiality_rate,
    sweep,
    time_scaling_fit,
)

__version__ = "0.1.0"
