"""Deterministic toy scoring backend.

Independent re-implementation of the synthetic instance family used by the
planning engine, so that client/server conformance tests compare two separate
codebases rather than one shared module. The generation recipe is fixed by
the protocol documentation: all draws come from ``numpy.random.default_rng(seed)``
in the order

  1. for ``random_dag``: one slot permutation, then one uniform per ordered
     pair of the permuted order (edge kept when the draw is < 0.4);
  2. per-slot high confidences, uniform in [0.70, 0.95];
  3. per-slot low confidences, uniform in [0.30, 0.60];
  4. the correct token matrix, integers in [0, 1e6);
  5. the degraded token matrix, same range, first token bumped by one
     (mod 1e6) if a row collides with the correct row.

Decoy slots are the parented slots with the most descendants (ties to the
lowest index), topped up from the lowest-index remaining slots when the DAG
has fewer parented slots than requested. They answer with the fixed decoy
confidence 0.96 until their parents hold correct content.
"""

from __future__ import annotations

import numpy as np

DECOY_CONFIDENCE = 0.96
EDGE_PROBABILITY = 0.4
TOKEN_SPACE = 1_000_000

DAG_KINDS = ("chain", "random_dag", "diamond")


class ToyError(ValueError):
    """Invalid generation parameters."""


def build_edges(k: int, dag_kind: str, rng: np.random.Generator) -> list[tuple[int, int]]:
    if dag_kind == "chain":
        return [(i, i + 1) for i in range(k - 1)]
    if dag_kind == "diamond":
        middles = range(1, k - 1)
        return [(0, m) for m in middles] + [(m, k - 1) for m in middles]
    order = [int(x) for x in rng.permutation(k)]
    edges = []
    for i in range(k):
        for j in range(i + 1, k):
            if rng.random() < EDGE_PROBABILITY:
                edges.append((order[i], order[j]))
    return edges


def reachable_from(start: int, children: dict[int, list[int]]) -> set[int]:
    seen: set[int] = set()
    frontier = list(children[start])
    while frontier:
        node = frontier.pop()
        if node not in seen:
            seen.add(node)
            frontier.extend(children[node])
    return seen


def pick_decoys(k: int, edges: list[tuple[int, int]], decoy_count: int) -> list[int]:
    children: dict[int, list[int]] = {i: [] for i in range(k)}
    has_parent = [False] * k
    for a, b in edges:
        children[a].append(b)
        has_parent[b] = True
    ranked = sorted(
        (i for i in range(k) if has_parent[i]),
        key=lambda i: (-len(reachable_from(i, children)), i),
    )
    chosen = ranked[:decoy_count]
    if len(chosen) < decoy_count:
        chosen += [i for i in range(k) if i not in chosen][: decoy_count - len(chosen)]
    return chosen


class ToyInstance:
    """One generated problem; scores propose requests deterministically."""

    def __init__(self, k: int, l: int, dag_kind: str, decoy_count: int, seed: int):
        if k < 2 or l < 1:
            raise ToyError(f"need k >= 2 and l >= 1, got k={k}, l={l}")
        if not 0 <= decoy_count < k:
            raise ToyError(f"need 0 <= decoy_count < k, got {decoy_count}")
        if dag_kind not in DAG_KINDS:
            raise ToyError(f"unknown dag_kind {dag_kind!r}")
        if dag_kind == "diamond" and k < 3:
            raise ToyError("diamond needs k >= 3")
        self.k = k
        self.l = l
        rng = np.random.default_rng(seed)
        self.edges = build_edges(k, dag_kind, rng)
        self.p_hi = [float(x) for x in rng.uniform(0.70, 0.95, size=k)]
        self.p_lo = [float(x) for x in rng.uniform(0.30, 0.60, size=k)]
        correct = rng.integers(0, TOKEN_SPACE, size=(k, l))
        degraded = rng.integers(0, TOKEN_SPACE, size=(k, l))
        for row in range(k):
            if (correct[row] == degraded[row]).all():
                degraded[row][0] = (degraded[row][0] + 1) % TOKEN_SPACE
        self.correct = [[int(t) for t in correct[row]] for row in range(k)]
        self.degraded = [[int(t) for t in degraded[row]] for row in range(k)]
        self.decoys = set(pick_decoys(k, self.edges, decoy_count))
        self.parents: dict[int, list[int]] = {i: [] for i in range(k)}
        for a, b in self.edges:
            self.parents[b].append(a)

    def score(self, slots: list[list[int] | None], target: int) -> tuple[list[int], list[float]]:
        """Tokens and per-token probabilities for filling ``target`` next."""
        parents_correct = all(
            slots[p] is not None and list(slots[p]) == self.correct[p]
            for p in self.parents[target]
        )
        if parents_correct:
            tokens, p = self.correct[target], self.p_hi[target]
        elif target in self.decoys:
            tokens, p = self.degraded[target], DECOY_CONFIDENCE
        else:
            tokens, p = self.degraded[target], self.p_lo[target]
        return list(tokens), [p] * self.l
