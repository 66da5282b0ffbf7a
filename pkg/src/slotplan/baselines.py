"""Reference planners and the exhaustive brute-force oracle.

The oracle replays every permutation through the deterministic transition
function, so it is correct by enumeration; a K <= 8 guard keeps that at most
40320 trajectories. Proposal caching makes the enumeration cheap for
order-insensitive models: distinct (contents, slot) pairs stay far below
K! * K.
"""

from __future__ import annotations

import enum
import itertools
import time
from typing import Optional

import numpy as np

from .analysis import RunRecord
from .core import (
    DecisionRecord,
    PlanTrace,
    SearchConfig,
    SlotState,
    admissible_actions,
    apply_action,
)
from .errors import InvalidConfig, TooLarge
from .mcts import plan as mcts_plan
from .model import CachedModel, InfillModel, SyntheticInstance, SyntheticModel


class PlannerKind(enum.Enum):
    SEQUENTIAL = "sequential"
    RANDOM = "random"
    GREEDY_CONFIDENCE = "greedy_confidence"
    MCTS = "mcts"
    ORACLE = "oracle"


def _empty_decision(wall_time: float, priors: Optional[dict] = None) -> DecisionRecord:
    return DecisionRecord(
        root_visit_counts={},
        root_q_values={},
        root_priors=priors or {},
        entropy_bits=None,
        concentration=None,
        wall_time=wall_time,
    )


def _fill_in_order(state: SlotState, model: InfillModel, order) -> PlanTrace:
    decisions = []
    for action in order:
        t0 = time.perf_counter()
        proposal = model.propose(state, action)
        state = apply_action(state, proposal)
        decisions.append(_empty_decision(time.perf_counter() - t0))
    return PlanTrace(
        permutation=tuple(order),
        final_state=state,
        decisions=tuple(decisions),
    )


def plan_sequential(state: SlotState, model: InfillModel) -> PlanTrace:
    """Fill slots left to right: 0, 1, ..., K-1."""
    return _fill_in_order(state, model, range(state.k))


def plan_random(state: SlotState, model: InfillModel, seed: int) -> PlanTrace:
    """Fill slots in a uniformly random seeded order."""
    order = [int(a) for a in np.random.default_rng(seed).permutation(state.k)]
    return _fill_in_order(state, model, order)


def plan_greedy_confidence(state: SlotState, model: InfillModel) -> PlanTrace:
    """At each step pick the most confident admissible slot (ties to lowest).

    Each decision records the observed confidences, normalized the same way
    search priors are, so greedy runs stay comparable in the output schema.
    """
    decisions = []
    permutation = []
    while not state.is_terminal:
        t0 = time.perf_counter()
        actions = admissible_actions(state)
        proposals = [model.propose(state, a) for a in actions]
        best_i = 0
        for i in range(1, len(proposals)):
            if proposals[i].confidence > proposals[best_i].confidence:
                best_i = i
        total = sum(p.confidence for p in proposals)
        priors = {
            a: (p.confidence / total if total > 0 else 1.0 / len(actions))
            for a, p in zip(actions, proposals)
        }
        state = apply_action(state, proposals[best_i])
        permutation.append(actions[best_i])
        decisions.append(_empty_decision(time.perf_counter() - t0, priors))
    return PlanTrace(
        permutation=tuple(permutation),
        final_state=state,
        decisions=tuple(decisions),
    )


MAX_ORACLE_SLOTS = 8


def oracle_exhaustive(
    state: SlotState,
    model: InfillModel,
    objective: str = "mean_reward",
) -> tuple[tuple[int, ...], float, list[tuple[tuple[int, ...], float]]]:
    """Score every fill order; return (best permutation, best score, full table).

    ``mean_reward`` scores a trajectory by its mean slot confidence;
    ``task_accuracy`` asks the model for the fraction of correct slots, which
    only synthetic-backed models can answer. Ties go to the lexicographically
    smallest permutation (the enumeration order).
    """
    if objective not in ("mean_reward", "task_accuracy"):
        raise InvalidConfig(f"unknown oracle objective {objective!r}")
    remaining = admissible_actions(state)
    if len(remaining) > MAX_ORACLE_SLOTS:
        raise TooLarge(
            f"exhaustive oracle refuses K={len(remaining)} > {MAX_ORACLE_SLOTS}"
        )
    if objective == "task_accuracy" and not hasattr(model, "accuracy"):
        raise InvalidConfig("task_accuracy objective needs a model with ground truth")
    cached = model if isinstance(model, CachedModel) else CachedModel(model)

    table: list[tuple[tuple[int, ...], float]] = []
    best_perm: Optional[tuple[int, ...]] = None
    best_score = -float("inf")
    for perm in itertools.permutations(remaining):
        current = state
        reward_sum = 0.0
        for action in perm:
            proposal = cached.propose(current, action)
            reward_sum += proposal.confidence
            current = apply_action(current, proposal)
        if objective == "mean_reward":
            score = reward_sum / len(perm) if perm else 0.0
        else:
            score = cached.accuracy(current)
        table.append((perm, score))
        if score > best_score:
            best_score = score
            best_perm = perm
    return best_perm, best_score, table


def run_planner(
    planner: str,
    instance: SyntheticInstance,
    cfg: SearchConfig,
    model: Optional[InfillModel] = None,
    instance_id: Optional[str] = None,
) -> RunRecord:
    """Execute one planner over one instance and package the result.

    ``model`` defaults to a cache-wrapped in-process synthetic model; passing
    a remote client reuses the local instance parameters for accuracy scoring.
    """
    reference = SyntheticModel(instance)
    if model is None:
        model = CachedModel(reference)
    state = SlotState.initial(instance.k, instance.l)
    t0 = time.perf_counter()
    if planner == PlannerKind.SEQUENTIAL.value:
        trace = plan_sequential(state, model)
    elif planner == PlannerKind.RANDOM.value:
        trace = plan_random(state, model, cfg.seed)
    elif planner == PlannerKind.GREEDY_CONFIDENCE.value:
        trace = plan_greedy_confidence(state, model)
    elif planner == PlannerKind.MCTS.value:
        trace = mcts_plan(state, model, cfg)
    else:
        raise InvalidConfig(f"unknown planner {planner!r}")
    wall = time.perf_counter() - t0
    accuracy = reference.accuracy(trace.final_state)
    return RunRecord(
        instance_id=instance_id or f"synthetic-{instance.seed}",
        instance=instance.descriptor(),
        planner=planner,
        search=cfg,
        trace=trace,
        accuracy=accuracy,
        solved=accuracy == 1.0,
        wall_time_total=wall,
    )
