"""Tree -> line, then online nearest-neighbour prediction with mistake certificate."""
import numpy as np

from wtagraph.bounds import mistake_certificate
from wtagraph.linearize import line_cutsizes, linearize
from wtagraph.trees import sample_rst
from wtagraph.harness import two_cluster_graph
from wtagraph.wta import run_online

rng = np.random.default_rng(3)
g, y = two_cluster_graph(200, rng=rng)
t = sample_rst(g, rng)
line = linearize(t)

# cutsize along the line is at most twice the tree cutsize
phi_t = int(sum(y[a] != y[b] for a, b, _ in t.edges()))
print("tree cutsize", phi_t, " line cutsize", line_cutsizes(line, y)[0])

trace = run_online(line, y, rng.permutation(g.n))
cert = mistake_certificate(trace, line, y)
print("mistakes", trace.mistakes, " certified bound", cert.certified_bound,
      " visits/n", round(trace.visits / g.n, 3))
