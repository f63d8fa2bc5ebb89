"""Adversarial labelings with small expected cutsize force about K/2 mistakes."""
import numpy as np

from wtagraph.baselines import WMVLearner
from wtagraph.bounds import adversarial_labeling, duel
from wtagraph.graph import effective_resistances
from wtagraph.harness import two_cluster_graph
from wtagraph.wta import WTALearner

g, _ = two_cluster_graph(60, p_in=0.2, p_out=0.05, communities=1, rng=np.random.SeedSequence(2))
rt = effective_resistances(g)
K = 12
inst = adversarial_labeling(g, K, 0, rt)
print("budget", K, " expected cutsize of the instance", round(inst.p_cutsize, 3))

for learner in (WTALearner, WMVLearner):
    res = duel(g, K, learner, 100, rng=1, rt=rt)
    lo, hi = res.interval()
    print(f"{learner.name:>4}: mean mistakes on support {res.mean:.2f}  (95% ci {lo:.2f}..{hi:.2f}, K/2 = {K / 2})")
