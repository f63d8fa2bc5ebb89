"""Batch error of WTA and GPA on each tree kind, one train/test split."""
import numpy as np

from wtagraph.harness import AlgorithmSpec, evaluate, make_split, predict_with, two_cluster_graph
from wtagraph.trees import TreeKind, sample_tree

g, y = two_cluster_graph(400, rng=np.random.SeedSequence(5))
rng = np.random.default_rng(5)
tr, te = make_split(g.n, 0.1, rng)
train = [(int(v), int(y[v])) for v in rng.permutation(tr)]

print(f"{'tree':>6} {'WTA':>7} {'GPA':>7}")
for kind in TreeKind:
    t = sample_tree(g, kind, rng)
    errs = [evaluate(predict_with(AlgorithmSpec(a, kind), g, [t], train, te), y[te])[0] for a in ("WTA", "GPA")]
    print(f"{kind.value:>6} {errs[0]:7.3f} {errs[1]:7.3f}")

for algo in ("WMV", "LABPROP"):
    print(f"{algo:>7}: {evaluate(predict_with(AlgorithmSpec(algo, None), g, [], train, te), y[te])[0]:.3f}")
