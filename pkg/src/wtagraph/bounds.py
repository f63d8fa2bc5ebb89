"""Lower-bound adversary, robustness quantities and explicit mistake certificates."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .graph import (Graph, ResistanceTable, as_labeling, effective_resistances,
                    phi_edges, write_labels)
from .linearize import LineGraph
from .rng import as_generator
from .trees import SpanningTree
from .wta import OnlineTrace

EXACT_ENUMERATION_MAX_N = 12
# absorbs rounding in log2 at exact powers of two
_LOG_SLACK = 1e-6


# ---------------------------------------------------------------- adversary


@dataclass(frozen=True)
class AdversarialInstance:
    budget: int
    support: np.ndarray
    labeling: np.ndarray
    node_weights: np.ndarray
    p_cutsize: float
    p_internal: float
    p_external: float
    outside_label: int

    def metadata(self) -> dict:
        return {
            "budget": self.budget,
            "support": self.support.tolist(),
            "p_cutsize": self.p_cutsize,
            "outside_label": self.outside_label,
        }

    def write(self, path):
        """Label file with the instance metadata as ``#`` comment lines."""
        meta = self.metadata()
        header = [f"{k}: {json.dumps(v)}" for k, v in meta.items()]
        write_labels(self.labeling, path, header=header)


def node_weights(g: Graph, rt: ResistanceTable) -> np.ndarray:
    """Per node, the summed inclusion probabilities of its incident edges."""
    rt.check(g)
    P = np.zeros(g.n)
    np.add.at(P, g.u, rt.p)
    np.add.at(P, g.v, rt.p)
    return P


def adversarial_labeling(g: Graph, K: int, rng=None, rt: ResistanceTable | None = None) -> AdversarialInstance:
    """Random labels on the ``K`` lightest nodes, one shared label elsewhere.

    Node weight is the sum of incident inclusion probabilities (ties by node
    id). The shared outside label is whichever sign gives the smaller
    probability-weighted cutsize.
    """
    if not 1 <= K <= g.n:
        raise ContractError(f"budget must lie in 1..{g.n}")
    rng = as_generator(rng)
    if rt is None:
        rt = effective_resistances(g)
    P = node_weights(g, rt)
    support = np.lexsort((np.arange(g.n), P))[:K]
    in_s = np.zeros(g.n, dtype=bool)
    in_s[support] = True
    y = np.zeros(g.n, dtype=np.int8)
    y[support] = rng.choice(np.array([-1, 1], dtype=np.int8), size=K)
    best = None
    for lab in (1, -1):
        cand = y.copy()
        cand[~in_s] = lab
        cut = float(rt.p[phi_edges(g, cand)].sum())
        if best is None or cut < best[0]:
            best = (cut, lab, cand)
    cut, lab, y = best
    both = in_s[g.u] & in_s[g.v]
    one = in_s[g.u] ^ in_s[g.v]
    return AdversarialInstance(
        budget=K, support=np.sort(support), labeling=y, node_weights=P,
        p_cutsize=cut, p_internal=float(rt.p[both].sum()), p_external=float(rt.p[one].sum()),
        outside_label=lab,
    )


class CoinFlipLearner:
    name = "coin"

    def __init__(self, g, rng=None):
        self.rng = as_generator(rng)

    def predict(self, node):
        return 1 if self.rng.random() < 0.5 else -1

    def reveal(self, node, label):
        pass


class ConstantLearner:
    name = "constant"

    def __init__(self, g, rng=None, label: int = 1):
        self.label = label

    def predict(self, node):
        return self.label

    def reveal(self, node, label):
        pass


@dataclass(frozen=True)
class DuelResult:
    budget: int
    mistakes: np.ndarray  # per trial, counted on the support only

    @property
    def mean(self) -> float:
        return float(self.mistakes.mean())

    @property
    def stderr(self) -> float:
        t = len(self.mistakes)
        return float(self.mistakes.std(ddof=1) / math.sqrt(t)) if t > 1 else float("nan")

    def interval(self, z: float = 1.96) -> tuple:
        return self.mean - z * self.stderr, self.mean + z * self.stderr


def duel(g: Graph, K: int, learner, trials: int, rng=None, order: str = "support-first",
         rt: ResistanceTable | None = None) -> DuelResult:
    """Play the adversary against ``learner(g, rng)`` for ``trials`` label draws.

    With ``order='support-first'`` the support nodes are presented first in
    random order; the rest of the permutation cannot affect the count and is
    skipped. ``order='random'`` presents a uniformly random permutation.
    """
    if trials < 1:
        raise ContractError("trials must be positive")
    rng = as_generator(rng)
    if rt is None:
        rt = effective_resistances(g)
    out = np.zeros(trials, dtype=np.int64)
    for t in range(trials):
        inst_rng, learner_rng, order_rng = rng.spawn(3)
        inst = adversarial_labeling(g, K, inst_rng, rt)
        in_s = np.zeros(g.n, dtype=bool)
        in_s[inst.support] = True
        if order == "support-first":
            seq = order_rng.permutation(inst.support)
        elif order == "random":
            seq = order_rng.permutation(g.n)
        else:
            raise ContractError("order must be 'support-first' or 'random'")
        agent = learner(g, learner_rng)
        y = inst.labeling
        count = 0
        for v in seq.tolist():
            p = agent.predict(v)
            if in_s[v] and p != y[v]:
                count += 1
            agent.reveal(v, int(y[v]))
        out[t] = count
    return DuelResult(budget=K, mistakes=out)


# ------------------------------------------------------ robustness quantities


def _tree_arrays(t: SpanningTree):
    mask = np.arange(t.n) != t.root
    child = np.arange(t.n)[mask]
    return child, t.parent[mask], t.parent_weight[mask]


def zeta(t: SpanningTree, K: int) -> float:
    """Total weight of the ``K`` heaviest tree edges."""
    w = t.edge_weights()
    if not 0 <= K <= len(w):
        raise ContractError(f"K must lie in 0..{len(w)}")
    if K == 0:
        return 0.0
    return float(np.partition(w, len(w) - K)[len(w) - K:].sum())


def label_distance(y, y2) -> int:
    y = np.asarray(y)
    y2 = np.asarray(y2)
    if y.shape != y2.shape:
        raise ContractError("labelings have different lengths")
    as_labeling(y, complete=True)
    as_labeling(y2, complete=True)
    return int((y != y2).sum())


def tree_cutsizes(t: SpanningTree, y) -> tuple:
    """``(number, total weight)`` of tree edges with disagreeing labels."""
    y = as_labeling(y, t.n, complete=True)
    c, p, w = _tree_arrays(t)
    cut = y[c] != y[p]
    return int(cut.sum()), float(w[cut].sum())


def _edge_child(t: SpanningTree, edge) -> int:
    a, b = edge
    if t.parent[a] == b and a != t.root:
        return int(a)
    if t.parent[b] == a and b != t.root:
        return int(b)
    raise ContractError(f"({a}, {b}) is not a tree edge")


def residual_resistance(t: SpanningTree, y, excluded=()) -> float:
    """Summed resistance of the agreeing tree edges not listed in ``excluded``."""
    y = as_labeling(y, t.n, complete=True)
    skip = set()
    for e in excluded:
        c = _edge_child(t, e)
        if y[c] != y[t.parent[c]]:
            raise ContractError(f"excluded edge {tuple(e)} is not phi-free")
        skip.add(c)
    total = 0.0
    for c, p, w in t.edges():
        if c not in skip and y[c] == y[p]:
            total += 1.0 / w
    return total


# --------------------------------------------------------- mistake certificate


@dataclass(frozen=True)
class ClusterTerm:
    start: int  # first line position of the cluster
    end: int  # last line position, inclusive
    first_queried: int  # line position, -1 if the cluster was never queried
    left_span: float
    left_weight: float
    right_span: float
    right_weight: float
    bound: int


@dataclass(frozen=True)
class BoundCertificate:
    observed_mistakes: int
    certified_bound: int
    clusters: list = field(repr=False)

    @property
    def slack(self) -> int:
        return self.certified_bound - self.observed_mistakes


def _halving_term(span: float, weight: float) -> int:
    if weight <= 0 or span <= 0:
        return 0
    return int(math.floor(math.log2(1.0 + span * weight) + _LOG_SLACK))


def mistake_certificate(trace: OnlineTrace, line: LineGraph, y) -> BoundCertificate:
    """Per-cluster mistake bound of nearest-neighbour prediction on a line.

    A cluster is a maximal run of equally labelled line nodes. Once its first
    queried node is revealed, each further mistake on either side at least
    halves the distance to the opposite label across the boundary edge, so a
    side of span ``R`` bordered by an edge of weight ``w`` costs at most
    ``floor(log2(1 + R w))`` mistakes, plus one for the first query.
    """
    y = as_labeling(y, line.n, complete=True)
    nodes = np.asarray(trace.nodes, dtype=np.int64)
    if len(nodes) and (nodes.min() < 0 or nodes.max() >= line.n):
        raise ContractError("trace node outside the line")
    if len(np.unique(nodes)) != len(nodes) or not np.array_equal(np.asarray(trace.truth), y[nodes]):
        raise ContractError("trace does not belong to this line and labeling")
    pos = line.position[nodes]
    first_time = np.full(line.n, len(nodes), dtype=np.int64)
    first_time[pos] = np.arange(len(nodes))
    ly = y[line.order]
    prefix = line.prefix_resistance
    w = line.edge_weights
    cuts = np.flatnonzero(ly[1:] != ly[:-1])
    starts = np.concatenate([[0], cuts + 1])
    ends = np.concatenate([cuts, [line.n - 1]])
    terms = []
    total = 0
    for a, b in zip(starts.tolist(), ends.tolist()):
        seg = first_time[a:b + 1]
        if seg.min() == len(nodes):
            terms.append(ClusterTerm(a, b, -1, 0.0, 0.0, 0.0, 0.0, 0))
            continue
        v0 = a + int(np.argmin(seg))
        lspan = float(prefix[v0] - prefix[a])
        rspan = float(prefix[b] - prefix[v0])
        lw = float(w[a - 1]) if a > 0 else 0.0
        rw = float(w[b]) if b < line.n - 1 else 0.0
        bound = 1 + _halving_term(lspan, lw) + _halving_term(rspan, rw)
        total += bound
        terms.append(ClusterTerm(a, b, v0, lspan, lw, rspan, rw, bound))
    return BoundCertificate(observed_mistakes=trace.mistakes, certified_bound=total, clusters=terms)


# ---------------------------------------------------------- robust cutsizes


def _candidate_labelings(y, nb_pairs, samples, rng):
    """Labelings close to ``y`` for sampled upper bounds of the robust minima."""
    n = len(y)
    cands = [y.copy(), np.ones(n, dtype=np.int8), -np.ones(n, dtype=np.int8)]
    c, p = nb_pairs
    # one round of neighbourhood majority smoothing
    vote = np.zeros(n)
    np.add.at(vote, c, y[p])
    np.add.at(vote, p, y[c])
    smooth = y.copy()
    smooth[(vote * y) < 0] *= -1
    cands.append(smooth)
    while len(cands) < samples:
        z = y.copy()
        k = int(rng.integers(1, max(2, n // 4) + 1))
        flip = rng.choice(n, size=min(k, n), replace=False)
        z[flip] *= -1
        cands.append(z)
    return np.array(cands[:max(samples, 4)], dtype=np.int8)


def _all_labelings(n: int) -> np.ndarray:
    codes = np.arange(1 << n, dtype=np.int64)[:, None]
    bits = (codes >> np.arange(n)) & 1
    return (2 * bits - 1).astype(np.int8)


@dataclass(frozen=True)
class RobustCutsizes:
    count: float  # min over y' of 2 (cut(y') + delta(y, y'))
    weight: float  # min over y' of 2 (weighted cut(y') + zeta(delta(y, y')))
    exact: bool  # False: minima over sampled y', hence upper bounds


def robust_tree_cutsizes(t: SpanningTree, y, samples: int = 200, rng=None) -> RobustCutsizes:
    """Perturbation-robust tree cutsizes: exact for n <= 12, sampled upper bounds above."""
    y = as_labeling(y, t.n, complete=True)
    c, p, w = _tree_arrays(t)
    exact = t.n <= EXACT_ENUMERATION_MAX_N
    Y = _all_labelings(t.n) if exact else _candidate_labelings(y, (c, p), samples, as_generator(rng))
    cut = Y[:, c] != Y[:, p]
    delta = (Y != y).sum(axis=1)
    heavy = np.concatenate([[0.0], np.cumsum(np.sort(w)[::-1])])
    zeta_d = heavy[np.minimum(delta, len(w))]
    cnt = 2 * (cut.sum(axis=1) + delta)
    wt = 2 * (cut @ w + zeta_d)
    return RobustCutsizes(count=float(cnt.min()), weight=float(wt.min()), exact=exact)


def robust_graph_cutsize(g: Graph, y, rt: ResistanceTable, samples: int = 200, rng=None) -> tuple:
    """``(min over y' of E[tree cut](y') + delta(y, y'), exact flag)``."""
    rt.check(g)
    y = as_labeling(y, g.n, complete=True)
    exact = g.n <= EXACT_ENUMERATION_MAX_N
    Y = _all_labelings(g.n) if exact else _candidate_labelings(y, (g.u, g.v), samples, as_generator(rng))
    cut = Y[:, g.u] != Y[:, g.v]
    vals = cut @ rt.p + (Y != y).sum(axis=1)
    return float(vals.min()), exact


# ---------------------------------------------------------- closed-form bounds


def _log_term(count, weight, resist):
    if count == 0:
        return 0.0
    return count * (1.0 + math.log(1.0 + resist * weight / count))


def theorem_bounds(obj, y, rt: ResistanceTable | None = None, excluded=(), samples: int = 200, rng=None) -> dict:
    """Evaluate the big-O mistake bounds without constants (diagnostic only).

    For a tree: the cutsize bound with resistances of ``excluded`` dropped,
    and its robust variant. For a graph: the random-spanning-tree bound in
    terms of expected tree cutsize and expected agreeing-edge resistance,
    and its robust variant.
    """
    y = as_labeling(y, complete=True)
    rng = as_generator(rng)
    if isinstance(obj, SpanningTree):
        count, weight = tree_cutsizes(obj, y)
        resist = residual_resistance(obj, y, excluded)
        rob = robust_tree_cutsizes(obj, y, samples, rng)
        return {
            "cutsize": count,
            "weighted_cutsize": weight,
            "residual_resistance": resist,
            "excluded": len(excluded),
            "tree_bound": _log_term(count, weight, resist) + len(excluded),
            "robust_cutsize": rob.count,
            "robust_weighted_cutsize": rob.weight,
            "robust_exact": rob.exact,
            "robust_tree_bound": _log_term(rob.count, rob.weight, resist) + count + len(excluded),
        }
    g = obj
    if rt is None:
        rt = effective_resistances(g)
    rt.check(g)
    phi = phi_edges(g, y)
    e_cut = float(rt.p[phi].sum())
    w_max = float(g.w[phi].max()) if phi.any() else 0.0
    e_resist = float(rt.r[~phi].sum())
    star, exact = robust_graph_cutsize(g, y, rt, samples, rng)
    log_factor = 1.0 + math.log(1.0 + w_max * e_resist)
    return {
        "expected_tree_cutsize": e_cut,
        "max_phi_weight": w_max,
        "expected_residual_resistance": e_resist,
        "scale_free_product": w_max * e_resist,
        "graph_bound": e_cut * log_factor if e_cut > 0 else 0.0,
        "robust_cutsize": star,
        "robust_exact": exact,
        "robust_graph_bound": star * log_factor + e_cut,
    }
