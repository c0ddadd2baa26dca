"""Hindsight optimization: brute force against the layered graph.

The undominated safe class over M units with at most m price levels has
sum_k C(M, k) members, one per nonempty subset of cut points. Picking
the best against a fixed history can either enumerate them all or walk
a layered graph whose paths are exactly those subsets, with each edge
carrying the value its cut contributes summed over the history. Both
give the same optimum; the graph does it in polynomial time and is what
the online learners sample from.

Run from the repository root:

    python3 demos/02_offline_oracle.py [--units 12] [--pairs 3] [--rounds 40]
"""

import argparse
import time

import numpy as np

from bidlab import (
    CompetingBids,
    SafeClassSpec,
    ValuationCurve,
    assign_offline_weights,
    brute_force_best,
    build_dag,
    clear_auction,
    max_weight_path,
    path_to_strategy,
    size_undominated,
)

parser = argparse.ArgumentParser()
parser.add_argument("--units", type=int, default=12)
parser.add_argument("--pairs", type=int, default=3)
parser.add_argument("--rounds", type=int, default=40)
parser.add_argument("--seed", type=int, default=11)
args = parser.parse_args()

rng = np.random.default_rng(args.seed)
M, m, T = args.units, args.pairs, args.rounds
curve = ValuationCurve(np.sort(rng.uniform(0.05, 1.0, M))[::-1])
history = [
    CompetingBids(M, rng.uniform(0.0, 1.1, int(rng.integers(1, M + 1))))
    for _ in range(T)
]
print(f"M={M} units, m={m} pairs, {T} rounds of competition")
print(f"class size: {size_undominated(M, m)} undominated strategies")

start = time.perf_counter()
best_strategy, best_value = brute_force_best(curve, m, history)
brute_dt = time.perf_counter() - start

start = time.perf_counter()
dag = build_dag(M, m)
assign_offline_weights(dag, history, curve)
path, dag_value = max_weight_path(dag)
dag_dt = time.perf_counter() - start

print(f"brute force: value {best_value:.6f} in {brute_dt*1e3:.1f} ms")
print(f"graph:       value {dag_value:.6f} in {dag_dt*1e3:.1f} ms")
assert abs(best_value - dag_value) <= 1e-9

chosen = path_to_strategy(path, curve)
print(f"optimal cut points {path.breakpoints} -> {chosen.to_text()}")
realized = sum(clear_auction(curve, chosen, cb).value for cb in history)
print(f"replayed value {realized:.6f} (matches the path weight)")

# the graph also prices every other subset: a few runners-up
scored = []
for candidate in dag.enumerate_paths():
    w = float(dag.weights[list(candidate.edges)].sum())
    scored.append((w, candidate.breakpoints))
scored.sort(reverse=True)
print("top five cut-point subsets:")
for w, cuts in scored[:5]:
    print(f"  {cuts}: {w:.6f}")
