"""Tree search over slot orderings.

Each per-step decision runs a fresh four-phase search from the current state:

  selection      descend by the prior-weighted upper-confidence score until a
                 childless node is reached;
  expansion      materialize one child per admissible action, with priors
                 formed by normalizing the model's slot confidences;
  evaluation     mix the evaluated edge's immediate confidence with the mean
                 return of one or more stochastic softmax rollouts;
  backpropagation add the value to every edge on the path back to the root.

The decision is the most-visited root edge (robust child). Selection and
expansion are deterministic; the only randomness is rollout sampling, drawn
from a single seeded generator in a fixed order, so a plan is reproducible
from its config seed alone.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .analysis import concentration, root_entropy_bits
from .core import (
    DecisionRecord,
    PlanTrace,
    SearchConfig,
    SlotAction,
    SlotState,
    admissible_actions,
    apply_action,
)
from .errors import InvalidConfig, ModelUnavailable, PlanAborted
from .model import InfillModel


class SearchNode:
    """One tree node plus the statistics of its incoming edge.

    ``n_state`` counts completed backpropagations that passed through this
    node as a parent; ``n_edge``/``w_edge`` are the visit count and value sum
    of the edge leading here from the parent. The mean edge value ``q`` is 0
    while the edge is unvisited.
    """

    __slots__ = (
        "state",
        "incoming_action",
        "incoming_confidence",
        "parent",
        "children",
        "prior",
        "n_state",
        "n_edge",
        "w_edge",
        "expanded",
    )

    def __init__(
        self,
        state: SlotState,
        incoming_action: Optional[SlotAction] = None,
        incoming_confidence: float = 0.0,
        parent: Optional["SearchNode"] = None,
        prior: float = 0.0,
    ):
        self.state = state
        self.incoming_action = incoming_action
        self.incoming_confidence = incoming_confidence
        self.parent = parent
        self.children: dict[SlotAction, SearchNode] = {}
        self.prior = prior
        self.n_state = 0
        self.n_edge = 0
        self.w_edge = 0.0
        self.expanded = False

    @property
    def q(self) -> float:
        return self.w_edge / self.n_edge if self.n_edge else 0.0


@dataclass(frozen=True)
class RolloutOutcome:
    """Mean reward of one stochastic completion; g == 0 when length == 0."""

    g: float
    length: int
    sampled_actions: tuple[SlotAction, ...]


def _effective_visits(node: SearchNode, root_visit_floor: str) -> int:
    # "one" counts the in-flight simulation: the first selection at a fresh
    # node sees sqrt(1), the second sqrt(2), matching the worked walkthrough.
    if root_visit_floor == "one":
        return node.n_state + 1
    return node.n_state


def puct_score(
    node: SearchNode,
    action: SlotAction,
    c: float,
    root_visit_floor: str = "one",
) -> float:
    """Mean edge value plus the prior-weighted exploration bonus."""
    child = node.children[action]
    n_eff = _effective_visits(node, root_visit_floor)
    return child.q + c * child.prior * math.sqrt(n_eff) / (1 + child.n_edge)


def select_child(node: SearchNode, c: float, root_visit_floor: str = "one") -> SearchNode:
    """One selection step: the child maximizing the score, ties to lowest slot."""
    n_eff = _effective_visits(node, root_visit_floor)
    sqrt_n = math.sqrt(n_eff)
    best_action = None
    best_score = -math.inf
    for action in sorted(node.children):
        child = node.children[action]
        score = child.q + c * child.prior * sqrt_n / (1 + child.n_edge)
        if score > best_score:
            best_score = score
            best_action = action
    return node.children[best_action]


def select(root: SearchNode, c: float, root_visit_floor: str = "one") -> SearchNode:
    """Descend by repeated argmax until a node with no children is reached."""
    node = root
    while node.children:
        node = select_child(node, c, root_visit_floor)
    return node


def expand(node: SearchNode, model: InfillModel, prior_mode: str = "confidence_normalized") -> None:
    """Create one child per admissible action with normalized-confidence priors.

    Child states are materialized eagerly from the model's proposals: each
    proposal is needed for the prior's numerator anyway, and the child state
    is needed the first time the search descends there.
    """
    if node.expanded:
        raise InvalidConfig("node is already expanded")
    actions = admissible_actions(node.state)
    if not actions:
        raise InvalidConfig("cannot expand a terminal node")
    proposals = [model.propose(node.state, a) for a in actions]
    total = sum(p.confidence for p in proposals)
    for action, proposal in zip(actions, proposals):
        if prior_mode == "uniform" or total <= 0.0:
            prior = 1.0 / len(actions)
        else:
            prior = proposal.confidence / total
        node.children[action] = SearchNode(
            state=apply_action(node.state, proposal),
            incoming_action=action,
            incoming_confidence=proposal.confidence,
            parent=node,
            prior=prior,
        )
    node.expanded = True


def rollout_distribution(confidences: Sequence[float], tau: float) -> list[float]:
    """Temperature softmax over confidences, max-shifted for stability."""
    top = max(confidences)
    weights = [math.exp((c - top) / tau) for c in confidences]
    total = sum(weights)
    return [w / total for w in weights]


def rollout(
    state: SlotState,
    model: InfillModel,
    tau: float,
    rng: np.random.Generator,
) -> RolloutOutcome:
    """Stochastic completion: sample slots by softmax(confidence / tau).

    Consumes exactly one uniform draw per step (including single-action
    steps), so the generator state after a rollout depends only on the number
    of remaining slots. Returns g == 0 for an already-terminal state.
    """
    current = state
    total_reward = 0.0
    taken: list[SlotAction] = []
    while not current.is_terminal:
        actions = admissible_actions(current)
        proposals = [model.propose(current, a) for a in actions]
        probs = rollout_distribution([p.confidence for p in proposals], tau)
        u = rng.random()
        acc = 0.0
        idx = len(actions) - 1
        for i, p in enumerate(probs):
            acc += p
            if u < acc:
                idx = i
                break
        chosen = proposals[idx]
        total_reward += chosen.confidence
        taken.append(actions[idx])
        current = apply_action(current, chosen)
    length = len(taken)
    g = total_reward / length if length else 0.0
    return RolloutOutcome(g=g, length=length, sampled_actions=tuple(taken))


def evaluate_leaf(
    leaf_parent: SearchNode,
    eval_child: SearchNode,
    model: InfillModel,
    cfg: SearchConfig,
    rng: np.random.Generator,
) -> float:
    """Mix the evaluated edge's immediate confidence with its rollout return.

    A terminal eval child contributes a zero rollout term, leaving only the
    weighted immediate confidence.
    """
    immediate = eval_child.incoming_confidence
    returns = [
        rollout(eval_child.state, model, cfg.tau, rng).g
        for _ in range(cfg.rollouts_per_eval)
    ]
    g = sum(returns) / len(returns)
    return cfg.lambda_mix * immediate + (1.0 - cfg.lambda_mix) * g


def backpropagate(node: SearchNode, value: float, root: SearchNode) -> None:
    """Add the value to every edge from ``node`` up to the root.

    Every parent on the path gains one state visit; the root therefore counts
    one visit per completed simulation. Backpropagating at the root itself
    only bumps its visit count.
    """
    if node is root:
        root.n_state += 1
        return
    while node is not root:
        node.n_edge += 1
        node.w_edge += value
        node.parent.n_state += 1
        node = node.parent


def run_simulations(
    root_state: SlotState,
    model: InfillModel,
    cfg: SearchConfig,
    rng: np.random.Generator,
) -> SearchNode:
    """Build and return the search tree after cfg.n_sim completed simulations."""
    if root_state.is_terminal:
        raise InvalidConfig("cannot search from a terminal state")
    root = SearchNode(root_state)
    for _ in range(cfg.n_sim):
        leaf = select(root, cfg.exploration_c, cfg.root_visit_floor)
        if not leaf.state.is_terminal and not leaf.expanded:
            expand(leaf, model, cfg.prior_mode)
            eval_node = select_child(leaf, cfg.exploration_c, cfg.root_visit_floor)
        else:
            eval_node = leaf
        parent = eval_node.parent if eval_node.parent is not None else root
        value = evaluate_leaf(parent, eval_node, model, cfg, rng)
        backpropagate(eval_node, value, root)
    return root


def robust_action(root: SearchNode) -> SlotAction:
    """The most-visited root edge; ties go to the lowest slot index."""
    decision = None
    best_visits = -1
    for action in sorted(root.children):
        if root.children[action].n_edge > best_visits:
            best_visits = root.children[action].n_edge
            decision = action
    return decision


def search_step(
    root_state: SlotState,
    model: InfillModel,
    cfg: SearchConfig,
    rng: np.random.Generator,
) -> tuple[SlotAction, DecisionRecord]:
    """Run a full budgeted search from ``root_state`` and pick the robust child."""
    started = time.perf_counter()
    root = run_simulations(root_state, model, cfg, rng)
    decision = robust_action(root)
    visit_counts = {a: root.children[a].n_edge for a in sorted(root.children)}
    record = DecisionRecord(
        root_visit_counts=visit_counts,
        root_q_values={a: root.children[a].q for a in sorted(root.children)},
        root_priors={a: root.children[a].prior for a in sorted(root.children)},
        entropy_bits=root_entropy_bits(visit_counts),
        concentration=concentration(visit_counts),
        wall_time=time.perf_counter() - started,
    )
    return decision, record


def plan(initial_state: SlotState, model: InfillModel, cfg: SearchConfig) -> PlanTrace:
    """Plan a full fill order: one fresh search per step, no subtree reuse.

    Deterministic for a fixed config seed. Model failures abort the plan and
    surface the failing step index.
    """
    if initial_state.step != 0:
        raise InvalidConfig("plan() starts from the all-masked state")
    rng = np.random.default_rng(cfg.seed)
    state = initial_state
    permutation: list[SlotAction] = []
    decisions: list[DecisionRecord] = []
    while not state.is_terminal:
        step_index = len(permutation)
        try:
            action, record = search_step(state, model, cfg, rng)
            proposal = model.propose(state, action)
        except ModelUnavailable as exc:
            raise PlanAborted(step_index, exc) from exc
        state = apply_action(state, proposal)
        permutation.append(action)
        decisions.append(record)
    return PlanTrace(
        permutation=tuple(permutation),
        final_state=state,
        decisions=tuple(decisions),
    )
