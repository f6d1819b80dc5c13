"""
Monte Carlo strategy comparisons
================================

Two sweep harnesses, both emitting tidy CSV:

  * group identification on random rectangle-drawn problems -- the group-aware
    splitter against the plain one (evaluated exactly from the built trees);
  * exact identification when queries come in groups -- the per-query splitter
    (free choice) against the group-suggestion strategies and baselines
    (estimated by simulated sessions, common random numbers across strategies).

greedy-choice baselines bracket the behavior: min-min picks the group whose
best member is cheapest (optimistic), min-max the group whose worst member
is cheapest (pessimistic), random asks anything still unanswered.

Scaled down here so the whole script runs in about a minute; crank the sizes
back up to 298 objects / 79 queries / 100 replicates to reproduce the shape
of the headline comparisons (the `querylearn sweep` command does exactly
that by default).
"""

import numpy as np

from querylearn.sweeps import (
    reports_to_csv,
    run_group_sweep,
    run_query_group_sweep,
)

# ---------------------------------------------------------------------------
# Sweep 1: how much does group awareness save, as groups get easier to tell
# apart? d2 controls between-group disagreement: larger d2 means group
# responses decorrelate, which is where keeping groups intact pays off.
# ---------------------------------------------------------------------------
reports = run_group_sweep(
    d1_values=[0.2],
    d2_values=[0.1, 0.3, 0.5],
    replicates=20,
    seed=1,
    group_sizes=(14, 12, 10, 9, 8, 7, 6, 5),
    n_queries=40,
)

print("group identification (20 replicates per cell):")
cells = {}
for r in reports:
    cells.setdefault(r.cell, {})[r.strategy] = r
for cell, by_strategy in cells.items():
    gbs, gisa = by_strategy["gbs"], by_strategy["gisa"]
    print(f"  {cell:14s} gbs {gbs.mean_ek:.3f}+/-{gbs.ci95:.3f}   "
          f"gisa {gisa.mean_ek:.3f}+/-{gisa.ci95:.3f}   "
          f"saving {gbs.mean_ek - gisa.mean_ek:+.3f}")
    assert gisa.mean_ek <= gbs.mean_ek + 1e-9

# ---------------------------------------------------------------------------
# Sweep 2: the cost of being offered a query group instead of choosing the
# query. Higher gamma_max makes queries more informative across the board.
# ---------------------------------------------------------------------------
strategies = ("gbs", "gqsa", "min-min", "min-max", "random")
reports2 = run_query_group_sweep(
    gamma_max_values=[0.9],
    replicates=8,
    seed=2,
    n_objects=96,
    query_group_sizes=(7, 6, 6, 5, 5, 4, 4, 3),
    strategies=strategies,
    objects_per_run=24,
)

print("\nquery groups, gamma_max=0.9 (8 replicates x 24 sampled objects):")
means = {r.strategy: r.mean_ek for r in reports2}
for s in strategies:
    print(f"  {s:8s} {means[s]:7.3f}")

# The free-choice splitter should beat every constrained strategy, and
# everything should beat asking at random.
assert means["gbs"] <= min(means[s] for s in strategies if s != "gbs")
assert means["random"] >= max(means[s] for s in strategies if s != "random")

# Full CSV (what `querylearn sweep --out report.csv` writes):
print()
print(reports_to_csv(reports2), end="")
