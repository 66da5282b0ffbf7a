"""Metrics and aggregations over completed plan runs.

Sequentiality is defined per decision as "chose the leftmost remaining masked
slot", which makes the identity permutation score exactly 1. Concentration is
the maximum visit share of a root decision. Entropy is measured at every root
decision and averaged per run; sweeps aggregate per-run means per grid cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .core import (
    DecisionRecord,
    PlanTrace,
    SearchConfig,
    SlotState,
)


def root_entropy_bits(visit_counts: Mapping[int, int]) -> float:
    """Shannon entropy (bits) of the normalized visit distribution.

    Zero-count actions contribute nothing; an empty or all-zero map scores 0.
    """
    total = sum(visit_counts.values())
    if total <= 0:
        return 0.0
    h = 0.0
    for n in visit_counts.values():
        if n > 0:
            p = n / total
            h -= p * math.log2(p)
    return h


def concentration(visit_counts: Mapping[int, int]) -> float:
    """Maximum visit share: max_a N^a / sum_a N^a (0 for an empty map)."""
    total = sum(visit_counts.values())
    if total <= 0:
        return 0.0
    return max(visit_counts.values()) / total


def sequentiality_rate(trace: PlanTrace) -> float:
    """Fraction of decisions that picked the lowest-index remaining slot."""
    remaining = set(range(len(trace.permutation)))
    hits = 0
    for chosen in trace.permutation:
        if chosen == min(remaining):
            hits += 1
        remaining.remove(chosen)
    return hits / len(trace.permutation)


@dataclass(frozen=True)
class RunRecord:
    """One planner run over one instance, with everything needed to replay it."""

    instance_id: str
    instance: dict
    planner: str
    search: SearchConfig
    trace: PlanTrace
    accuracy: Optional[float]
    solved: bool
    wall_time_total: float

    def __post_init__(self):
        if self.accuracy is not None and self.accuracy == 1.0 and not self.solved:
            raise ValueError("accuracy 1.0 must imply solved")

    def mean_entropy_bits(self) -> Optional[float]:
        values = [d.entropy_bits for d in self.trace.decisions if d.entropy_bits is not None]
        if not values:
            return None
        return sum(values) / len(values)

    def mean_concentration(self) -> Optional[float]:
        values = [d.concentration for d in self.trace.decisions if d.concentration is not None]
        if not values:
            return None
        return sum(values) / len(values)


# ---------------------------------------------------------------------------
# JSON round-tripping. Field order is fixed so serialized records are stable.
# ---------------------------------------------------------------------------

def state_to_jsonable(state: SlotState) -> dict:
    return {
        "order_prefix": list(state.order_prefix),
        "slots": [list(s) if s is not None else None for s in state.slots],
        "slot_len": state.slot_len,
    }


def state_from_jsonable(data: dict) -> SlotState:
    return SlotState(
        order_prefix=tuple(data["order_prefix"]),
        slots=tuple(tuple(s) if s is not None else None for s in data["slots"]),
        slot_len=data["slot_len"],
    )


def decision_to_jsonable(d: DecisionRecord, include_timing: bool = True) -> dict:
    out = {
        "root_visit_counts": {str(a): n for a, n in sorted(d.root_visit_counts.items())},
        "root_q_values": {str(a): q for a, q in sorted(d.root_q_values.items())},
        "root_priors": {str(a): p for a, p in sorted(d.root_priors.items())},
        "entropy_bits": d.entropy_bits,
        "concentration": d.concentration,
    }
    if include_timing:
        out["wall_time"] = d.wall_time
    return out


def decision_from_jsonable(data: dict) -> DecisionRecord:
    return DecisionRecord(
        root_visit_counts={int(a): n for a, n in data["root_visit_counts"].items()},
        root_q_values={int(a): q for a, q in data["root_q_values"].items()},
        root_priors={int(a): p for a, p in data["root_priors"].items()},
        entropy_bits=data["entropy_bits"],
        concentration=data["concentration"],
        wall_time=data.get("wall_time", 0.0),
    )


def trace_to_jsonable(trace: PlanTrace, include_timing: bool = True) -> dict:
    return {
        "permutation": list(trace.permutation),
        "final_state": state_to_jsonable(trace.final_state),
        "decisions": [decision_to_jsonable(d, include_timing) for d in trace.decisions],
    }


def trace_from_jsonable(data: dict) -> PlanTrace:
    return PlanTrace(
        permutation=tuple(data["permutation"]),
        final_state=state_from_jsonable(data["final_state"]),
        decisions=tuple(decision_from_jsonable(d) for d in data["decisions"]),
    )


def search_config_to_jsonable(cfg: SearchConfig) -> dict:
    return {
        "exploration_c": cfg.exploration_c,
        "n_sim": cfg.n_sim,
        "lambda_mix": cfg.lambda_mix,
        "tau": cfg.tau,
        "seed": cfg.seed,
        "rollouts_per_eval": cfg.rollouts_per_eval,
        "prior_mode": cfg.prior_mode,
        "root_visit_floor": cfg.root_visit_floor,
    }


def search_config_from_jsonable(data: dict) -> SearchConfig:
    return SearchConfig(**data)


def record_to_jsonable(record: RunRecord) -> dict:
    return {
        "instance_id": record.instance_id,
        "instance": record.instance,
        "planner": record.planner,
        "search": search_config_to_jsonable(record.search),
        "trace": trace_to_jsonable(record.trace),
        "accuracy": record.accuracy,
        "solved": record.solved,
        "wall_time_total": record.wall_time_total,
    }


def record_from_jsonable(data: dict) -> RunRecord:
    return RunRecord(
        instance_id=data["instance_id"],
        instance=data["instance"],
        planner=data["planner"],
        search=search_config_from_jsonable(data["search"]),
        trace=trace_from_jsonable(data["trace"]),
        accuracy=data["accuracy"],
        solved=data["solved"],
        wall_time_total=data["wall_time_total"],
    )


# ---------------------------------------------------------------------------
# Sweeps and fits
# ---------------------------------------------------------------------------

SWEEP_COLUMNS = (
    "c",
    "n_sim",
    "mean_accuracy",
    "std_accuracy",
    "mean_entropy_bits",
    "std_entropy_bits",
    "mean_concentration",
    "mean_seq_rate",
    "mean_wall_ms",
)


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def _std(values: Sequence[float]) -> float:
    m = _mean(values)
    return math.sqrt(sum((v - m) ** 2 for v in values) / len(values))


def sweep(
    c_values: Sequence[float],
    n_sim_values: Sequence[int],
    instances: Sequence,
    seeds: Sequence[int],
    base_config: SearchConfig = SearchConfig(),
) -> tuple[list[dict], list[RunRecord]]:
    """Run the search planner over the (c, n_sim) grid.

    Every grid cell executes all instance x seed runs; rows aggregate per-run
    statistics (population std). Returns (rows, per-run records); rows follow
    SWEEP_COLUMNS and are emitted in grid order, so reruns are byte-identical.
    """
    from dataclasses import replace

    from .baselines import run_planner  # deferred: baselines imports the search

    rows: list[dict] = []
    all_records: list[RunRecord] = []
    for c in c_values:
        for n_sim in n_sim_values:
            cell_records = []
            for instance in instances:
                for seed in seeds:
                    cfg = replace(base_config, exploration_c=c, n_sim=n_sim, seed=seed)
                    record = run_planner("mcts", instance, cfg)
                    cell_records.append(record)
            rows.append(summarize_cell(c, n_sim, cell_records))
            all_records.extend(cell_records)
    return rows, all_records


def summarize_cell(c: float, n_sim: int, records: Sequence[RunRecord]) -> dict:
    accuracies = [r.accuracy for r in records if r.accuracy is not None]
    entropies = [e for e in (r.mean_entropy_bits() for r in records) if e is not None]
    concentrations = [x for x in (r.mean_concentration() for r in records) if x is not None]
    seq_rates = [sequentiality_rate(r.trace) for r in records]
    wall_ms = [1000.0 * r.wall_time_total for r in records]
    return {
        "c": c,
        "n_sim": n_sim,
        "mean_accuracy": _mean(accuracies) if accuracies else 0.0,
        "std_accuracy": _std(accuracies) if accuracies else 0.0,
        "mean_entropy_bits": _mean(entropies) if entropies else 0.0,
        "std_entropy_bits": _std(entropies) if entropies else 0.0,
        "mean_concentration": _mean(concentrations) if concentrations else 0.0,
        "mean_seq_rate": _mean(seq_rates),
        "mean_wall_ms": _mean(wall_ms),
    }


def time_scaling_fit(points: Iterable) -> dict:
    """Least-squares line through (n_sim, total wall time) observations.

    Accepts RunRecords or bare (x, y) pairs. Constant-x or fewer than three
    distinct x values flag insufficient data; a two-point fit is perfect by
    construction. Constant y with zero residual counts as r2 == 1.
    """
    xy: list[tuple[float, float]] = []
    for p in points:
        if isinstance(p, RunRecord):
            xy.append((float(p.search.n_sim), p.wall_time_total))
        else:
            x, y = p
            xy.append((float(x), float(y)))
    if len(xy) < 2:
        raise ValueError("need at least two points to fit a line")
    xs = [x for x, _ in xy]
    ys = [y for _, y in xy]
    n = len(xy)
    mean_x = _mean(xs)
    mean_y = _mean(ys)
    sxx = sum((x - mean_x) ** 2 for x in xs)
    if sxx == 0.0:
        raise ValueError("all x values identical; cannot fit a slope")
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in xy)
    slope = sxy / sxx
    intercept = mean_y - slope * mean_x
    ss_res = sum((y - (slope * x + intercept)) ** 2 for x, y in xy)
    ss_tot = sum((y - mean_y) ** 2 for y in ys)
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res == 0.0 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return {
        "slope": slope,
        "intercept": intercept,
        "r2": r2,
        "n_points": n,
        "insufficient_data": len(set(xs)) < 3,
    }
