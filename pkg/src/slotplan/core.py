"""Domain types for the slot-ordering MDP.

A state is an order prefix (which slots were filled, in what order) plus the
partially filled slot grid. Masked slots are ``None``; filled slots hold an
immutable tuple of token ids. States are immutable values: transitions return
new states, so a search tree can hold many sibling states at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import InadmissibleAction, InvalidConfig

# A slot action is just the index of the masked slot to fill next.
SlotAction = int

MASKED = None

TokenVector = tuple[int, ...]


@dataclass(frozen=True)
class SlotState:
    """Order prefix plus the partially filled slot grid.

    Invariants (checked at construction):
      * ``order_prefix`` has no duplicates, every index in ``[0, K)``;
      * ``slots[k]`` is filled iff ``k`` appears in ``order_prefix``;
      * every filled slot holds exactly ``slot_len`` tokens.
    """

    order_prefix: tuple[int, ...]
    slots: tuple[Optional[TokenVector], ...]
    slot_len: int

    def __post_init__(self):
        k = len(self.slots)
        if self.slot_len < 1:
            raise InvalidConfig(f"slot_len must be >= 1, got {self.slot_len}")
        seen = set(self.order_prefix)
        if len(seen) != len(self.order_prefix):
            raise InvalidConfig(f"duplicate slot index in order prefix {self.order_prefix}")
        if any(i < 0 or i >= k for i in seen):
            raise InvalidConfig(f"order prefix {self.order_prefix} out of range for K={k}")
        for i, tokens in enumerate(self.slots):
            if (tokens is not None) != (i in seen):
                raise InvalidConfig(f"slot {i} fill status disagrees with order prefix")
            if tokens is not None and len(tokens) != self.slot_len:
                raise InvalidConfig(
                    f"slot {i} holds {len(tokens)} tokens, expected {self.slot_len}"
                )

    @classmethod
    def initial(cls, k: int, slot_len: int) -> "SlotState":
        """The all-masked state for a K-slot problem."""
        return cls(order_prefix=(), slots=(MASKED,) * k, slot_len=slot_len)

    @property
    def k(self) -> int:
        return len(self.slots)

    @property
    def step(self) -> int:
        return len(self.order_prefix)

    @property
    def is_terminal(self) -> bool:
        return len(self.order_prefix) == len(self.slots)


@dataclass(frozen=True)
class SlotProposal:
    """A model's deterministic infill for one slot.

    ``confidence`` is the arithmetic mean of ``token_probs``; it is derived at
    construction and revalidated if passed explicitly.
    """

    slot_index: int
    tokens: TokenVector
    token_probs: tuple[float, ...]
    confidence: float = field(default=-1.0)

    def __post_init__(self):
        if len(self.tokens) != len(self.token_probs):
            raise InvalidConfig("tokens and token_probs must have equal length")
        if not self.token_probs:
            raise InvalidConfig("a proposal must hold at least one token")
        if any(p < 0.0 or p > 1.0 for p in self.token_probs):
            raise InvalidConfig(f"token_probs outside [0, 1]: {self.token_probs}")
        mean = sum(self.token_probs) / len(self.token_probs)
        if self.confidence < 0.0:
            object.__setattr__(self, "confidence", mean)
        elif abs(self.confidence - mean) > 1e-12:
            raise InvalidConfig(
                f"confidence {self.confidence} != mean(token_probs) {mean}"
            )


def admissible_actions(state: SlotState) -> list[SlotAction]:
    """Indices of the still-masked slots, ascending. Empty iff terminal."""
    filled = set(state.order_prefix)
    return [i for i in range(state.k) if i not in filled]


def apply_action(state: SlotState, proposal: SlotProposal) -> SlotState:
    """Deterministic transition: fill the proposed slot, extend the prefix.

    The input state is not modified. Raises InadmissibleAction if the slot is
    already filled.
    """
    k = proposal.slot_index
    if k < 0 or k >= state.k:
        raise InadmissibleAction(f"slot {k} out of range for K={state.k}")
    if state.slots[k] is not MASKED:
        raise InadmissibleAction(f"slot {k} is already filled")
    slots = list(state.slots)
    slots[k] = tuple(proposal.tokens)
    return SlotState(
        order_prefix=state.order_prefix + (k,),
        slots=tuple(slots),
        slot_len=state.slot_len,
    )


PRIOR_MODES = ("confidence_normalized", "uniform")
ROOT_VISIT_FLOORS = ("zero", "one")


@dataclass(frozen=True)
class SearchConfig:
    """Search hyperparameters.

    Defaults follow the recommended operating point: lambda_mix=0.3, c=50,
    n_sim=256, tau=0.5. ``prior_mode="uniform"`` degrades the prior-guided
    selection toward plain UCT-style search. ``root_visit_floor`` selects how
    the parent visit count enters the exploration term: ``"one"`` counts the
    in-flight simulation (sqrt(N+1)), ``"zero"`` uses the raw count.
    """

    exploration_c: float = 50.0
    n_sim: int = 256
    lambda_mix: float = 0.3
    tau: float = 0.5
    seed: int = 0
    rollouts_per_eval: int = 1
    prior_mode: str = "confidence_normalized"
    root_visit_floor: str = "one"

    def __post_init__(self):
        if self.exploration_c < 0:
            raise InvalidConfig(f"exploration_c must be >= 0, got {self.exploration_c}")
        if self.n_sim < 1:
            raise InvalidConfig(f"n_sim must be >= 1, got {self.n_sim}")
        if not 0.0 <= self.lambda_mix <= 1.0:
            raise InvalidConfig(f"lambda_mix must be in [0, 1], got {self.lambda_mix}")
        if self.tau <= 0:
            raise InvalidConfig(f"tau must be > 0, got {self.tau}")
        if self.rollouts_per_eval < 1:
            raise InvalidConfig(f"rollouts_per_eval must be >= 1, got {self.rollouts_per_eval}")
        if self.prior_mode not in PRIOR_MODES:
            raise InvalidConfig(f"unknown prior_mode {self.prior_mode!r}")
        if self.root_visit_floor not in ROOT_VISIT_FLOORS:
            raise InvalidConfig(f"unknown root_visit_floor {self.root_visit_floor!r}")


@dataclass(frozen=True)
class DecisionRecord:
    """Per-step statistics of one root decision.

    Baseline planners that never build a tree leave the visit map empty and
    the entropy/concentration fields as None.
    """

    root_visit_counts: dict[SlotAction, int]
    root_q_values: dict[SlotAction, float]
    root_priors: dict[SlotAction, float]
    entropy_bits: Optional[float]
    concentration: Optional[float]
    wall_time: float


@dataclass(frozen=True)
class PlanTrace:
    """A chosen permutation with the per-decision statistics that produced it."""

    permutation: tuple[SlotAction, ...]
    final_state: SlotState
    decisions: tuple[DecisionRecord, ...]

    def __post_init__(self):
        k = self.final_state.k
        if sorted(self.permutation) != list(range(k)):
            raise InvalidConfig(f"permutation {self.permutation} is not a bijection on [0, {k})")
        if not self.final_state.is_terminal:
            raise InvalidConfig("final state still has masked slots")
        if len(self.decisions) != k:
            raise InvalidConfig(f"expected {k} decision records, got {len(self.decisions)}")
