"""Majority vote over independently drawn random spanning trees."""
import numpy as np

from wtagraph.harness import evaluate, make_split, two_cluster_graph
from wtagraph.trees import TreeKind
from wtagraph.wta import committee_predict

g, y = two_cluster_graph(400, rng=np.random.SeedSequence(9))
rng = np.random.default_rng(9)
tr, te = make_split(g.n, 0.1, rng)
train = [(int(v), int(y[v])) for v in tr]

for k in (1, 7, 11, 17):
    pred = committee_predict(g, TreeKind.RST, k, train, te, rng=np.random.SeedSequence([9, k]))
    print(f"{k:>2} trees: error {evaluate(pred, y[te])[0]:.3f}")
