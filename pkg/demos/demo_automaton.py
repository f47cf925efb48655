"""
A learning automaton picking the best of a few circles
======================================================

Five candidate circles compete for probability mass. Each time the automaton
picks one, it is rewarded by the share of its perimeter that lands on edge
pixels, so the true circle ends up with most of the mass.
"""

import numpy as np

from lacircle import (
    ActionSet,
    CandidateCircle,
    EdgeMap,
    LearningConfig,
    rasterize_circle,
    run_learning,
)

w, h = 200, 200
bits = np.zeros((h, w), dtype=bool)
truth = rasterize_circle((100, 100, 50), w, h).points
bits[truth[:, 1], truth[:, 0]] = True
edges = EdgeMap(bits)

params = [(100, 100, 50), (104, 100, 50), (100, 100, 60), (60, 70, 30), (150, 150, 40)]
actions = ActionSet(tuple(CandidateCircle(0, 1, 2, *map(float, p)) for p in params),
                    w, h, 20.0, 100.0, len(params))

pv, betas = run_learning(actions, edges, LearningConfig(theta=0.05, k_max=300, p_stop=0.9, seed=3))

print(f"stopped after {pv.iteration} steps ({pv.stop_reason})")
for p, prm, b in zip(pv.p, params, betas.values()):
    # unvisited actions show nan
    print(f"  {str(prm):<18} p = {p:.3f}   beta = {b:.2f}")
