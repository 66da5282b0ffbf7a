"""Exploration-constant / simulation-budget sweep on the decoy suite.

Runs the search planner over a c x n_sim grid of decoy chains (half
index-aligned, half reverse-indexed) and writes one CSV row per cell.

Usage:
    python3 scripts/experiment_exploration_sweep.py

Output: results/exploration_sweep.csv plus a rendered table on stdout.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from slotplan import generate_instance, relabel_slots
from slotplan.analysis import SWEEP_COLUMNS, sweep
from slotplan.cli import write_csv_atomic

C_VALUES = [1.5, 2.0, 4.0, 10.0, 50.0, 100.0]
N_SIM_VALUES = [30, 90, 270]
SEEDS = [0, 1, 2]
N_INSTANCES = 10  # per orientation

OUT = os.path.join(os.path.dirname(__file__), "..", "results", "exploration_sweep.csv")


def build_suite():
    aligned = [generate_instance(5, 1, "chain", 1, seed=5000 + i) for i in range(N_INSTANCES)]
    rev = [
        relabel_slots(generate_instance(5, 1, "chain", 1, seed=5100 + i), [4, 3, 2, 1, 0])
        for i in range(N_INSTANCES)
    ]
    return aligned + rev


def main():
    suite = build_suite()
    print(f"sweep: {len(C_VALUES)}x{len(N_SIM_VALUES)} grid, "
          f"{len(suite)} instances x {len(SEEDS)} seeds per cell")
    rows, _ = sweep(C_VALUES, N_SIM_VALUES, suite, SEEDS)
    os.makedirs(os.path.dirname(OUT), exist_ok=True)
    write_csv_atomic(OUT, SWEEP_COLUMNS, rows)
    print(f"wrote {OUT}\n")
    header = f"{'c':>6} {'n_sim':>6} {'accuracy':>9} {'entropy':>8} {'conc':>6} {'seq':>6} {'ms':>8}"
    print(header)
    for row in rows:
        print(
            f"{row['c']:>6g} {row['n_sim']:>6d} {row['mean_accuracy']:>9.3f} "
            f"{row['mean_entropy_bits']:>8.3f} {row['mean_concentration']:>6.3f} "
            f"{row['mean_seq_rate']:>6.3f} {row['mean_wall_ms']:>8.2f}"
        )


if __name__ == "__main__":
    main()
