"""Planner quality against the exhaustive oracle across exploration constants.

For each c, plans every instance and reports how close the search comes to
the brute-force optimum under both objectives: mean trajectory confidence
(what the search optimizes) and task accuracy (fraction of correct slots).
Locates the exploration sweet spot of the confidence-normalized search.

Usage:
    python3 scripts/experiment_oracle_gap.py
"""

import os
import statistics
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from slotplan import (
    CachedModel,
    SearchConfig,
    SyntheticModel,
    apply_action,
    generate_instance,
    is_topological,
    oracle_exhaustive,
    run_planner,
)

C_VALUES = [0.5, 1.5, 3.0, 6.0, 12.0, 25.0, 50.0, 100.0]
N_SIM = 512
N_INSTANCES = 30
SEEDS = [0, 1, 2]


def plan_mean_reward(instance, permutation):
    model = SyntheticModel(instance)
    state = model.initial_state()
    total = 0.0
    for action in permutation:
        proposal = model.propose(state, action)
        total += proposal.confidence
        state = apply_action(state, proposal)
    return total / instance.k


def main():
    instances = [generate_instance(5, 1, "random_dag", 1, seed=i) for i in range(N_INSTANCES)]
    oracles = []
    for instance in instances:
        model = CachedModel(SyntheticModel(instance))
        _, best_reward, _ = oracle_exhaustive(model.initial_state(), model, "mean_reward")
        oracles.append(best_reward)

    print(f"{N_INSTANCES} decoy DAGs x {len(SEEDS)} seeds, n_sim={N_SIM}")
    print(f"{'c':>6} {'reward/opt':>10} {'>=99%opt':>9} {'topo':>6} {'accuracy':>9}")
    for c in C_VALUES:
        ratios, topo, acc = [], 0, []
        for instance, best in zip(instances, oracles):
            for seed in SEEDS:
                cfg = SearchConfig(exploration_c=c, n_sim=N_SIM, seed=seed)
                record = run_planner("mcts", instance, cfg)
                ratios.append(plan_mean_reward(instance, record.trace.permutation) / best)
                topo += is_topological(record.trace.permutation, instance.dag_edges)
                acc.append(record.accuracy)
        runs = len(ratios)
        print(
            f"{c:>6g} {statistics.mean(ratios):>10.4f} "
            f"{sum(r >= 0.99 for r in ratios) / runs:>9.1%} "
            f"{topo / runs:>6.1%} {statistics.mean(acc):>9.3f}"
        )


if __name__ == "__main__":
    main()
