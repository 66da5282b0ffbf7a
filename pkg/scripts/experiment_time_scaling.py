"""Wall-time scaling of the planner with the simulation budget.

Fits total plan time against n_sim and compares timings across exploration
constants (selection arithmetic only, so c should be nearly free).

Usage:
    python3 scripts/experiment_time_scaling.py
"""

import os
import statistics
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from slotplan import SearchConfig, generate_instance, run_planner, time_scaling_fit

N_SIM_VALUES = [30, 60, 90, 180, 270]
C_VALUES = [2.0, 100.0]
N_INSTANCES = 8
SEEDS = [0, 1, 2]
REPS = 3


def best_wall(instance, cfg):
    return min(
        run_planner("mcts", instance, cfg).wall_time_total for _ in range(REPS)
    )


def main():
    instances = [generate_instance(5, 1, "random_dag", 0, seed=4000 + i) for i in range(N_INSTANCES)]
    per_cell = {}
    for c in C_VALUES:
        for n_sim in N_SIM_VALUES:
            times = [
                best_wall(instance, SearchConfig(exploration_c=c, n_sim=n_sim, seed=seed))
                for instance in instances
                for seed in SEEDS
            ]
            per_cell[(c, n_sim)] = statistics.mean(times)

    points = [
        (n, statistics.mean(per_cell[(c, n)] for c in C_VALUES)) for n in N_SIM_VALUES
    ]
    fit = time_scaling_fit(points)
    print(f"{'n_sim':>6} " + " ".join(f"c={c:<6g}" for c in C_VALUES))
    for n in N_SIM_VALUES:
        print(f"{n:>6} " + " ".join(f"{per_cell[(c, n)] * 1000:8.2f}" for c in C_VALUES))
    print(
        f"\nlinear fit: slope={fit['slope'] * 1000:.4f} ms/sim, "
        f"intercept={fit['intercept'] * 1000:.2f} ms, r2={fit['r2']:.4f}"
    )
    for n in (N_SIM_VALUES[0], N_SIM_VALUES[-1]):
        lo, hi = per_cell[(C_VALUES[0], n)], per_cell[(C_VALUES[-1], n)]
        rel = abs(lo - hi) / statistics.mean([lo, hi])
        print(f"c-sensitivity at n_sim={n}: {rel:.1%}")


if __name__ == "__main__":
    main()
