"""Realized approximation ratios on a brute-forceable instance.

Draws a small minimum spanning tree instance with square-root group costs
and compares each solver against exhaustive search for a few epsilons.
"""
import numpy as np

from coopsub.algorithms import curvature, pla_solve, sga_solve
from coopsub.experiments import random_constraint, random_cost
from coopsub.greedy import brute_force

rng = np.random.default_rng(28)
tree = random_constraint(rng, "tree", 8, max_edges=16)
cost = random_cost(rng, tree.n, 2, "power")
opt = brute_force(1, cost, constraint=tree)
print(f"{tree.n} edges, optimum {opt.value:.4f} at {opt.chosen}")

for eps in (1.0, 0.5, 0.1):
    rep = pla_solve(1, cost, eps, constraint=tree)
    print(f"PLA eps={eps:<4} pieces {rep.pieces_total:>4}  ratio {rep.objective / opt.value:.4f}"
          f"  (bound {rep.guarantee['factor']:.2f})")

sga = sga_solve(1, cost, constraint=tree)
curv = curvature(cost, sga.chosen)
print(f"SGA        iterations {len(sga.history):>2}  ratio {sga.objective / opt.value:.4f}"
      f"  (curvature estimate {curv.average_curvature:.3f}, alpha {curv.alpha:.2f})")
