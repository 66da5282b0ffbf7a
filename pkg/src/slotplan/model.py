"""Infill-model abstraction, the synthetic model family, caching, remote client.

The synthetic family is the desk-scale stand-in for a real infill model. Each
instance carries a dependency DAG over slots plus two token fills per slot: a
correct one, proposed at high confidence once all DAG parents are filled with
their own correct tokens, and a degraded one otherwise. Decoy slots invert the
confidence signal: queried before their parents are correctly in place they
propose degraded tokens at a confidence above every honest high-confidence
value, so planners that chase immediate confidence fill them first and pay for
it downstream. By construction a permutation fills every slot correctly iff it
is a topological order of the DAG.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass
from typing import Iterable, Optional, Protocol, runtime_checkable

import numpy as np
import requests

from .core import SlotAction, SlotProposal, SlotState
from .errors import InadmissibleAction, InvalidConfig, ModelUnavailable

DECOY_CONFIDENCE = 0.96

DAG_KINDS = ("chain", "random_dag", "diamond")

RANDOM_DAG_EDGE_PROB = 0.4

_TOKEN_SPACE = 1_000_000


@runtime_checkable
class InfillModel(Protocol):
    """Behavioral contract for infill backends.

    Implementations must be deterministic: identical (state contents,
    slot_index) pairs yield byte-identical proposals. The deterministic MDP
    transition relies on this.
    """

    def propose(self, state: SlotState, action: SlotAction) -> SlotProposal: ...


def _check_admissible(state: SlotState, action: SlotAction) -> None:
    if action < 0 or action >= state.k or state.slots[action] is not None:
        raise InadmissibleAction(f"slot {action} is not an admissible action")


class ConstantModel:
    """Per-slot constant confidences, independent of fill state.

    Reference backend for unit tests and the worked-example walkthroughs:
    slot k always proposes token vector (k,)*L at its fixed confidence.
    """

    def __init__(self, confidences: Iterable[float], slot_len: int = 1):
        self.confidences = tuple(float(c) for c in confidences)
        self.slot_len = slot_len

    def propose(self, state: SlotState, action: SlotAction) -> SlotProposal:
        _check_admissible(state, action)
        p = self.confidences[action]
        return SlotProposal(
            slot_index=action,
            tokens=(action,) * self.slot_len,
            token_probs=(p,) * self.slot_len,
        )


@dataclass(frozen=True)
class SyntheticInstance:
    """Parameters of one synthetic planning problem.

    ``dag_edges`` are (parent, child) pairs and must be acyclic. ``decoys``
    hold inflated confidence ``decoy_confidence`` whenever their parents are
    not yet correctly filled; the generator keeps it above every p_hi.
    """

    k: int
    l: int
    dag_edges: frozenset[tuple[int, int]]
    correct_tokens: tuple[tuple[int, ...], ...]
    degraded_tokens: tuple[tuple[int, ...], ...]
    p_hi: tuple[float, ...]
    p_lo: tuple[float, ...]
    decoys: frozenset[int]
    seed: int
    decoy_confidence: float = DECOY_CONFIDENCE

    def __post_init__(self):
        if self.k < 2 or self.l < 1:
            raise InvalidConfig(f"need k >= 2 and l >= 1, got k={self.k}, l={self.l}")
        for a, b in self.dag_edges:
            if not (0 <= a < self.k and 0 <= b < self.k) or a == b:
                raise InvalidConfig(f"bad edge ({a}, {b}) for k={self.k}")
        if _has_cycle(self.k, self.dag_edges):
            raise InvalidConfig("dag_edges contain a cycle")
        for k in range(self.k):
            if self.correct_tokens[k] == self.degraded_tokens[k]:
                raise InvalidConfig(f"slot {k}: correct and degraded tokens coincide")
            if not 0.0 < self.p_lo[k] < self.p_hi[k] < 1.0:
                raise InvalidConfig(
                    f"slot {k}: need 0 < p_lo < p_hi < 1, got {self.p_lo[k]}, {self.p_hi[k]}"
                )
        if self.decoys and self.decoy_confidence <= max(self.p_hi):
            raise InvalidConfig("decoy confidence must exceed every p_hi")

    def parents(self) -> dict[int, tuple[int, ...]]:
        out: dict[int, list[int]] = {i: [] for i in range(self.k)}
        for a, b in sorted(self.dag_edges):
            out[b].append(a)
        return {i: tuple(v) for i, v in out.items()}

    def descriptor(self) -> dict:
        """JSON-ready summary used in run records and server registration."""
        return {
            "k": self.k,
            "l": self.l,
            "seed": self.seed,
            "dag_edges": sorted(self.dag_edges),
            "decoys": sorted(self.decoys),
        }


def _has_cycle(k: int, edges: Iterable[tuple[int, int]]) -> bool:
    children: dict[int, list[int]] = {i: [] for i in range(k)}
    indeg = [0] * k
    for a, b in edges:
        children[a].append(b)
        indeg[b] += 1
    queue = [i for i in range(k) if indeg[i] == 0]
    seen = 0
    while queue:
        n = queue.pop()
        seen += 1
        for c in children[n]:
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    return seen != k


def _descendant_counts(k: int, edges: frozenset[tuple[int, int]]) -> list[int]:
    children: dict[int, list[int]] = {i: [] for i in range(k)}
    for a, b in edges:
        children[a].append(b)
    counts = []
    for root in range(k):
        seen: set[int] = set()
        stack = list(children[root])
        while stack:
            n = stack.pop()
            if n not in seen:
                seen.add(n)
                stack.extend(children[n])
        counts.append(len(seen))
    return counts


def generate_instance(
    k: int,
    l: int,
    dag_kind: str,
    decoy_count: int,
    seed: int,
) -> SyntheticInstance:
    """Build a reproducible synthetic instance.

    Random draws happen in a fixed order from ``numpy.random.default_rng(seed)``
    so that independent implementations (e.g. the scoring server's toy
    backend) can reproduce instances bit-for-bit:

      1. for ``random_dag``: a slot permutation, then one uniform per ordered
         pair (upper triangle of the permuted order, edge kept at p < 0.4);
      2. per-slot p_hi, uniform in [0.70, 0.95];
      3. per-slot p_lo, uniform in [0.30, 0.60];
      4. correct token matrix, integers in [0, 1e6);
      5. degraded token matrix, same range (first token bumped on collision).

    Decoy placement draws nothing: decoys go to parented slots with the most
    descendants (ties to the lowest index), so a decoy taken early degrades as
    much downstream content as possible.
    """
    if k < 2 or l < 1:
        raise InvalidConfig(f"need k >= 2 and l >= 1, got k={k}, l={l}")
    if not 0 <= decoy_count < k:
        raise InvalidConfig(f"need 0 <= decoy_count < k, got {decoy_count}")
    if dag_kind not in DAG_KINDS:
        raise InvalidConfig(f"unknown dag_kind {dag_kind!r}")
    if dag_kind == "diamond" and k < 3:
        raise InvalidConfig("diamond needs k >= 3")

    rng = np.random.default_rng(seed)

    if dag_kind == "chain":
        edges = {(i, i + 1) for i in range(k - 1)}
    elif dag_kind == "diamond":
        edges = {(0, m) for m in range(1, k - 1)} | {(m, k - 1) for m in range(1, k - 1)}
    else:
        perm = [int(x) for x in rng.permutation(k)]
        edges = set()
        for i in range(k):
            for j in range(i + 1, k):
                if rng.random() < RANDOM_DAG_EDGE_PROB:
                    edges.add((perm[i], perm[j]))

    p_hi = tuple(float(x) for x in rng.uniform(0.70, 0.95, size=k))
    p_lo = tuple(float(x) for x in rng.uniform(0.30, 0.60, size=k))
    correct = rng.integers(0, _TOKEN_SPACE, size=(k, l))
    degraded = rng.integers(0, _TOKEN_SPACE, size=(k, l))
    for row in range(k):
        if (correct[row] == degraded[row]).all():
            degraded[row][0] = (degraded[row][0] + 1) % _TOKEN_SPACE

    desc = _descendant_counts(k, frozenset(edges))
    parented = sorted(
        (i for i in range(k) if any(b == i for _, b in edges)),
        key=lambda i: (-desc[i], i),
    )
    decoys = parented[:decoy_count]
    if len(decoys) < decoy_count:
        # Edgeless DAGs have no parented slot to bait; fall back to low indices.
        rest = [i for i in range(k) if i not in decoys]
        decoys += rest[: decoy_count - len(decoys)]

    return SyntheticInstance(
        k=k,
        l=l,
        dag_edges=frozenset(edges),
        correct_tokens=tuple(tuple(int(t) for t in correct[row]) for row in range(k)),
        degraded_tokens=tuple(tuple(int(t) for t in degraded[row]) for row in range(k)),
        p_hi=p_hi,
        p_lo=p_lo,
        decoys=frozenset(decoys),
        seed=seed,
    )


def relabel_slots(instance: SyntheticInstance, mapping: Iterable[int]) -> SyntheticInstance:
    """Relabel slot indices through a permutation (old index -> new index).

    Structure-preserving: the DAG, confidences, tokens and decoys move with
    their slots. Relabeling a chain with the reversal permutation yields a
    reverse-indexed chain whose only topological order runs K-1 .. 0.
    """
    m = list(mapping)
    if sorted(m) != list(range(instance.k)):
        raise InvalidConfig(f"mapping {m} is not a permutation of [0, {instance.k})")
    inv = [0] * instance.k
    for old, new in enumerate(m):
        inv[new] = old
    return SyntheticInstance(
        k=instance.k,
        l=instance.l,
        dag_edges=frozenset((m[a], m[b]) for a, b in instance.dag_edges),
        correct_tokens=tuple(instance.correct_tokens[inv[i]] for i in range(instance.k)),
        degraded_tokens=tuple(instance.degraded_tokens[inv[i]] for i in range(instance.k)),
        p_hi=tuple(instance.p_hi[inv[i]] for i in range(instance.k)),
        p_lo=tuple(instance.p_lo[inv[i]] for i in range(instance.k)),
        decoys=frozenset(m[d] for d in instance.decoys),
        seed=instance.seed,
        decoy_confidence=instance.decoy_confidence,
    )


def is_topological(permutation: Iterable[int], edges: Iterable[tuple[int, int]]) -> bool:
    pos = {slot: i for i, slot in enumerate(permutation)}
    return all(pos[a] < pos[b] for a, b in edges)


def count_topological_orders(k: int, edges: Iterable[tuple[int, int]]) -> int:
    """Number of linear extensions of the DAG, by subset DP (fine for K <= ~16)."""
    parent_mask = [0] * k
    for a, b in edges:
        parent_mask[b] |= 1 << a
    counts = [0] * (1 << k)
    counts[0] = 1
    for mask in range(1 << k):
        if counts[mask] == 0:
            continue
        for nxt in range(k):
            bit = 1 << nxt
            if mask & bit or (parent_mask[nxt] & mask) != parent_mask[nxt]:
                continue
            counts[mask | bit] += counts[mask]
    return counts[(1 << k) - 1]


def instance_to_jsonable(instance: SyntheticInstance) -> dict:
    """Full instance content, enough to rebuild the model without the generator."""
    return {
        "k": instance.k,
        "l": instance.l,
        "seed": instance.seed,
        "dag_edges": [list(e) for e in sorted(instance.dag_edges)],
        "correct_tokens": [list(t) for t in instance.correct_tokens],
        "degraded_tokens": [list(t) for t in instance.degraded_tokens],
        "p_hi": list(instance.p_hi),
        "p_lo": list(instance.p_lo),
        "decoys": sorted(instance.decoys),
        "decoy_confidence": instance.decoy_confidence,
    }


def instance_from_jsonable(data: dict) -> SyntheticInstance:
    return SyntheticInstance(
        k=data["k"],
        l=data["l"],
        seed=data["seed"],
        dag_edges=frozenset((a, b) for a, b in data["dag_edges"]),
        correct_tokens=tuple(tuple(t) for t in data["correct_tokens"]),
        degraded_tokens=tuple(tuple(t) for t in data["degraded_tokens"]),
        p_hi=tuple(data["p_hi"]),
        p_lo=tuple(data["p_lo"]),
        decoys=frozenset(data["decoys"]),
        decoy_confidence=data["decoy_confidence"],
    )


class SyntheticModel:
    """Deterministic infill model defined by a SyntheticInstance."""

    def __init__(self, instance: SyntheticInstance):
        self.instance = instance
        self._parents = instance.parents()

    def initial_state(self) -> SlotState:
        return SlotState.initial(self.instance.k, self.instance.l)

    def propose(self, state: SlotState, action: SlotAction) -> SlotProposal:
        _check_admissible(state, action)
        inst = self.instance
        parents_correct = all(
            state.slots[p] == inst.correct_tokens[p] for p in self._parents[action]
        )
        if parents_correct:
            tokens, p = inst.correct_tokens[action], inst.p_hi[action]
        elif action in inst.decoys:
            tokens, p = inst.degraded_tokens[action], inst.decoy_confidence
        else:
            tokens, p = inst.degraded_tokens[action], inst.p_lo[action]
        return SlotProposal(slot_index=action, tokens=tokens, token_probs=(p,) * inst.l)

    def accuracy(self, state: SlotState) -> float:
        """Fraction of slots holding their correct tokens (masked counts as wrong)."""
        inst = self.instance
        hits = sum(
            1 for i in range(inst.k) if state.slots[i] == inst.correct_tokens[i]
        )
        return hits / inst.k


class ProposalCache:
    """Memo table keyed by (128-bit hash of filled contents, target slot).

    The key covers the full token contents of every filled slot, never just
    the filled-index set: two fill orders can reach the same index set with
    different contents. ``debug_full_keys`` additionally stores the raw key
    material so tests can prove the hash never collided.
    """

    def __init__(self, debug_full_keys: bool = False):
        self._entries: dict[tuple[bytes, int], SlotProposal] = {}
        self._full_keys: Optional[dict[tuple[bytes, int], bytes]] = (
            {} if debug_full_keys else None
        )
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    @staticmethod
    def _content_key(state: SlotState) -> tuple[bytes, bytes]:
        parts = [str(state.slot_len)]
        for i, tokens in enumerate(state.slots):
            if tokens is not None:
                parts.append(f"{i}:" + ",".join(map(str, tokens)))
        raw = ";".join(parts).encode()
        return hashlib.blake2b(raw, digest_size=16).digest(), raw

    def lookup(self, state: SlotState, action: SlotAction) -> Optional[SlotProposal]:
        digest, raw = self._content_key(state)
        hit = self._entries.get((digest, action))
        if hit is None:
            self.misses += 1
            return None
        if self._full_keys is not None and self._full_keys[(digest, action)] != raw:
            raise AssertionError("proposal cache hash collision")
        self.hits += 1
        return hit

    def store(self, state: SlotState, action: SlotAction, proposal: SlotProposal) -> None:
        digest, raw = self._content_key(state)
        with self._lock:
            self._entries[(digest, action)] = proposal
            if self._full_keys is not None:
                self._full_keys[(digest, action)] = raw

    def __len__(self) -> int:
        return len(self._entries)


def cached_propose(
    cache: ProposalCache, model: InfillModel, state: SlotState, action: SlotAction
) -> SlotProposal:
    """propose() routed through the cache; identical results under the determinism contract."""
    hit = cache.lookup(state, action)
    if hit is not None:
        return hit
    proposal = model.propose(state, action)
    cache.store(state, action, proposal)
    return proposal


class CachedModel:
    """InfillModel wrapper routing propose() through a ProposalCache."""

    def __init__(self, model: InfillModel, cache: Optional[ProposalCache] = None):
        self.model = model
        self.cache = cache if cache is not None else ProposalCache()

    def propose(self, state: SlotState, action: SlotAction) -> SlotProposal:
        return cached_propose(self.cache, self.model, state, action)

    def __getattr__(self, name):
        return getattr(self.model, name)


class RemoteModel:
    """Client for the remote scoring protocol (HTTP POST /v1/propose).

    Failures are not retried: a transport error or non-200 response surfaces
    as ModelUnavailable so the planner aborts the instance instead of skewing
    timing analyses with silent retries.
    """

    def __init__(self, base_url: str, instance_id: str, slot_len: int, timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.instance_id = instance_id
        self.slot_len = slot_len
        self.timeout = timeout
        self._session = requests.Session()

    def propose(self, state: SlotState, action: SlotAction) -> SlotProposal:
        _check_admissible(state, action)
        body = {
            "protocol_version": "1",
            "instance_id": self.instance_id,
            "slot_size": self.slot_len,
            "slots": [list(s) if s is not None else None for s in state.slots],
            "target_slot": action,
        }
        try:
            resp = self._session.post(
                f"{self.base_url}/v1/propose", json=body, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise ModelUnavailable(f"propose request failed: {exc}") from exc
        if resp.status_code != 200:
            raise ModelUnavailable(
                f"propose returned HTTP {resp.status_code}: {resp.text[:200]}"
            )
        try:
            payload = resp.json()
            tokens = tuple(int(t) for t in payload["tokens"])
            probs = tuple(float(p) for p in payload["token_probs"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ModelUnavailable(f"malformed propose response: {exc}") from exc
        return SlotProposal(slot_index=action, tokens=tokens, token_probs=probs)


def register_remote_instance(base_url: str, spec: dict, timeout: float = 10.0) -> str:
    """POST the synthetic instance spec to the server; returns its instance id."""
    try:
        resp = requests.post(
            f"{base_url.rstrip('/')}/v1/instances", json=spec, timeout=timeout
        )
    except requests.RequestException as exc:
        raise ModelUnavailable(f"instance registration failed: {exc}") from exc
    if resp.status_code != 200:
        raise ModelUnavailable(
            f"instance registration returned HTTP {resp.status_code}: {resp.text[:200]}"
        )
    return resp.json()["instance_id"]
