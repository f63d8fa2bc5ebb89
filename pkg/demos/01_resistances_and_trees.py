"""Edge resistances as tree-inclusion probabilities, checked by sampling."""
import numpy as np

from wtagraph.graph import Graph, effective_resistances
from wtagraph.trees import estimate_inclusion_probabilities

# a 4-cycle with one chord and one heavy edge
g = Graph(4, [0, 1, 2, 3, 0], [1, 2, 3, 0, 2], [1.0, 1.0, 3.0, 1.0, 0.5])
rt = effective_resistances(g)
print("w * r per edge:", np.round(rt.p, 4), " sum =", rt.p.sum(), "(n - 1 = 3)")

est = estimate_inclusion_probabilities(g, rng=1, samples=20_000)
print("sampled freq  :", np.round(est.frequency, 4))
print("max gap       :", np.abs(est.frequency - rt.p).max())
