"""Comparison predictors: weighted majority vote, label propagation and the
graph Perceptron run on a spanning tree."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, GraphError
from .graph import Graph, as_labeling
from .trees import SpanningTree, check_tree
from .wta import OnlineTrace, _as_permutation, _train_items

GPA_NODE_CAP = 4000


def _sign(x):
    return np.where(x >= 0, 1, -1).astype(np.int8)


def wmv_predict(g: Graph, revealed, node: int) -> int:
    """Sign of the weight-averaged revealed neighbour labels; zero votes +1."""
    y = as_labeling(revealed, g.n)
    nb, w, _ = g.neighbors(node)
    return 1 if float(np.dot(y[nb], w)) >= 0 else -1


def wmv_batch(g: Graph, train, test) -> np.ndarray:
    y = np.zeros(g.n, dtype=np.int8)
    for v, lab in _train_items(train):
        y[v] = lab
    test = np.asarray(list(test), dtype=np.int64)
    A = adjacency_matrix(g)
    return _sign(A[test] @ y.astype(np.float64))


def adjacency_matrix(g: Graph) -> sp.csr_matrix:
    return sp.csr_matrix((g.adj_weights, g.indices, g.indptr), shape=(g.n, g.n))


@dataclass(frozen=True)
class LabPropConfig:
    tolerance: float = 1e-6
    max_iterations: int = 10_000

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ContractError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ContractError("max_iterations must be positive")


@dataclass(frozen=True)
class LabPropResult:
    scores: np.ndarray
    labels: np.ndarray
    iterations: int
    converged: bool


def label_propagation(g: Graph, train, cfg: LabPropConfig = LabPropConfig()) -> LabPropResult:
    """Harmonic solution by Jacobi sweeps.

    Training nodes stay clamped to their labels; every other node takes the
    weighted average of its neighbours' current scores. Sweeps stop when no
    score moves by ``cfg.tolerance`` or more.
    """
    g.require_connected()
    items = _train_items(train)
    if not items:
        raise ContractError("label propagation needs at least one training label")
    idx = np.array([v for v, _ in items], dtype=np.int64)
    lab = np.array([l for _, l in items], dtype=np.float64)
    A = adjacency_matrix(g)
    deg = np.asarray(A.sum(axis=1)).ravel()
    f = np.zeros(g.n)
    f[idx] = lab
    converged = False
    it = 0
    while it < cfg.max_iterations:
        it += 1
        nf = (A @ f) / deg
        nf[idx] = lab
        change = np.max(np.abs(nf - f))
        f = nf
        if change < cfg.tolerance:
            converged = True
            break
    if not converged:
        warnings.warn(f"label propagation did not converge in {cfg.max_iterations} sweeps", RuntimeWarning)
    return LabPropResult(scores=f, labels=_sign(f), iterations=it, converged=converged)


def labprop_batch(g: Graph, train, test, cfg: LabPropConfig = LabPropConfig()) -> np.ndarray:
    res = label_propagation(g, train, cfg)
    return res.labels[np.asarray(list(test), dtype=np.int64)]


def tree_resistance_matrix(t: SpanningTree) -> np.ndarray:
    """All-pairs path resistances of a tree in O(n^2).

    Moving from a parent to a child adds the edge resistance to every node
    outside the child's subtree and removes it for nodes inside.
    """
    n = t.n
    pre = t.preorder
    rank = np.empty(n, dtype=np.int64)
    rank[pre] = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    par = t.parent
    for i in pre[::-1].tolist():
        if i != t.root:
            size[par[i]] += size[i]
    # rows/columns indexed by preorder rank so subtrees are contiguous
    D = np.zeros((n, n))
    for i in pre[1:].tolist():  # root row: resistance from the root
        D[0, rank[i]] = D[0, rank[par[i]]] + 1.0 / t.parent_weight[i]
    for i in pre[1:].tolist():
        ri, rp = rank[i], rank[par[i]]
        r = 1.0 / t.parent_weight[i]
        row = D[rp] + r
        row[ri:ri + size[i]] -= 2 * r
        D[ri] = row
    out = np.empty_like(D)
    out[np.ix_(pre, pre)] = D
    return out


def tree_kernel(t: SpanningTree) -> np.ndarray:
    """Kernel ``L^+ + 1 1^T`` of a tree Laplacian, built from path resistances."""
    n = t.n
    if n > GPA_NODE_CAP:
        raise GraphError(f"dense tree kernel capped at {GPA_NODE_CAP} nodes (tree has {n}); use WTA instead")
    R = tree_resistance_matrix(t)
    Rc = R - R.mean(axis=0, keepdims=True)
    Rc -= Rc.mean(axis=1, keepdims=True)
    K = -0.5 * Rc + 1.0
    return (K + K.T) / 2


class _Perceptron:
    def __init__(self, K):
        self.K = K
        self.scores = np.zeros(K.shape[0])

    def predict(self, i: int) -> int:
        return 1 if self.scores[i] >= 0 else -1

    def update(self, i: int, label: int):
        self.scores += label * self.K[i]


def graph_perceptron_tree(t: SpanningTree, order, y, kernel=None) -> OnlineTrace:
    """Online kernel Perceptron with the tree Laplacian kernel; updates on mistakes."""
    check_tree(t)
    y = as_labeling(y, t.n, complete=True)
    order = _as_permutation(order, t.n)
    per = _Perceptron(tree_kernel(t) if kernel is None else kernel)
    preds = []
    for v in order.tolist():
        p = per.predict(v)
        preds.append(p)
        if p != y[v]:
            per.update(v, int(y[v]))
    return OnlineTrace(order, np.array(preds, dtype=np.int8), y[order])


def gpa_batch(t: SpanningTree, train, test, kernel=None) -> np.ndarray:
    """One mistake-driven pass over ``train`` (in the given order), then predict ``test``."""
    items = _train_items(train)
    test = np.asarray(list(test), dtype=np.int64)
    if {v for v, _ in items}.intersection(test.tolist()):
        raise ContractError("training and test sets overlap")
    per = _Perceptron(tree_kernel(t) if kernel is None else kernel)
    for v, lab in items:
        if per.predict(v) != lab:
            per.update(v, lab)
    return _sign(per.scores[test])


class WMVLearner:
    name = "WMV"

    def __init__(self, g: Graph, rng=None):
        self.g = g
        self.y = np.zeros(g.n, dtype=np.int8)

    def predict(self, node: int) -> int:
        return wmv_predict(self.g, self.y, node)

    def reveal(self, node: int, label: int):
        self.y[node] = label


class LabPropLearner:
    """Online use of label propagation: re-solve after every revealed label."""

    name = "LABPROP"

    def __init__(self, g: Graph, rng=None, cfg: LabPropConfig = LabPropConfig()):
        self.g = g
        self.cfg = cfg
        self.train = {}

    def predict(self, node: int) -> int:
        if not self.train:
            return 1
        return int(label_propagation(self.g, self.train, self.cfg).labels[node])

    def reveal(self, node: int, label: int):
        self.train[node] = label
