"""Depth-first linearization of a weighted tree into a weighted line."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ContractError, GraphError
from .graph import as_labeling
from .rng import as_generator
from .trees import SpanningTree, check_tree


@dataclass(frozen=True, eq=False)
class LineGraph:
    """Nodes in line order, the ``n - 1`` weights between neighbours and the
    cumulative resistance from the left terminal to each position."""

    order: np.ndarray
    edge_weights: np.ndarray
    prefix_resistance: np.ndarray

    @property
    def n(self) -> int:
        return len(self.order)

    @cached_property
    def position(self) -> np.ndarray:
        pos = np.empty(self.n, dtype=np.int64)
        pos[self.order] = np.arange(self.n)
        return pos

    def distance(self, a: int, b: int) -> float:
        """Resistance distance between line positions ``a`` and ``b``."""
        return float(abs(self.prefix_resistance[a] - self.prefix_resistance[b]))

    def scaled(self, alpha: float) -> "LineGraph":
        return make_line(self.order, self.edge_weights * alpha)

    def to_text(self) -> str:
        parts = [str(int(self.order[0]))]
        for w, v in zip(self.edge_weights.tolist(), self.order[1:].tolist()):
            parts += [repr(w), str(v)]
        return " ".join(parts)

    @classmethod
    def from_text(cls, text: str) -> "LineGraph":
        tokens = text.split()
        if len(tokens) % 2 == 0:
            raise GraphError("line text must alternate node and weight, starting and ending with a node")
        try:
            nodes = [int(x) for x in tokens[0::2]]
            weights = [float(x) for x in tokens[1::2]]
        except ValueError:
            raise GraphError("malformed line text") from None
        return make_line(nodes, weights)


def make_line(order, edge_weights) -> LineGraph:
    order = np.asarray(order, dtype=np.int64)
    w = np.asarray(edge_weights, dtype=np.float64)
    if len(w) != len(order) - 1:
        raise ContractError("a line on n nodes has n - 1 edges")
    if len(order) == 0 or not np.array_equal(np.sort(order), np.arange(len(order))):
        raise ContractError("line order must be a permutation of 0..n-1")
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise ContractError("line weights must be finite and positive")
    prefix = np.zeros(len(order), dtype=np.longdouble)
    np.cumsum(1.0 / w.astype(np.longdouble), out=prefix[1:])
    for a in (order, w, prefix):
        a.setflags(write=False)
    return LineGraph(order, w, prefix)


def depth_first_walk(t: SpanningTree, start=None, child_order: str = "deterministic", rng=None):
    """Full depth-first tour of ``t``: every traversed edge, backtracking included.

    Returns ``(nodes, weights)`` where ``weights[k]`` joins ``nodes[k]`` and
    ``nodes[k + 1]``. The tour ends back at ``start``, so it has
    ``2(n - 1)`` edges.
    """
    if start is None or start == "root":
        start = t.root
    if not 0 <= start < t.n:
        raise ContractError("start node out of range")
    nb = t.neighbor_lists()
    if child_order == "seeded":
        rng = as_generator(rng)
        nb = [[lst[k] for k in rng.permutation(len(lst))] for lst in nb]
    elif child_order != "deterministic":
        raise ContractError("child_order must be 'deterministic' or 'seeded'")
    nodes = [start]
    weights = []
    visited = [False] * t.n
    visited[start] = True
    # stack of (node, weight of edge to its DFS parent, next neighbour slot)
    stack = [[start, None, 0]]
    while stack:
        top = stack[-1]
        i, back_w, k = top
        lst = nb[i]
        while k < len(lst) and visited[lst[k][0]]:
            k += 1
        if k < len(lst):
            j, w = lst[k]
            top[2] = k + 1
            visited[j] = True
            nodes.append(j)
            weights.append(w)
            stack.append([j, w, 0])
        else:
            stack.pop()
            if stack:
                nodes.append(stack[-1][0])
                weights.append(back_w)
    return nodes, weights


def compact(nodes, weights):
    """Drop repeated nodes, keeping first occurrences.

    Two surviving neighbours are joined by the lightest edge of the stretch
    between them; a trailing stretch of repeats is simply cut off.
    """
    seen = set()
    order = []
    out_w = []
    run_min = None
    for k, v in enumerate(nodes):
        if k > 0:
            w = weights[k - 1]
            run_min = w if run_min is None else min(run_min, w)
        if v not in seen:
            seen.add(v)
            if k > 0:
                out_w.append(run_min)
            order.append(v)
            run_min = None
    return order, out_w


def eliminate_stepwise(nodes, weights, elimination_order):
    """Reference elimination: remove repeated positions one at a time in the
    given order, merging the two incident edges into the lighter one."""
    size = len(nodes)
    nxt = list(range(1, size)) + [None]
    prv = [None] + list(range(size - 1))
    right = list(weights) + [None]  # right[k]: weight of edge k -> nxt[k]
    first = {}
    for k, v in enumerate(nodes):
        first.setdefault(v, k)
    dup = {k for k, v in enumerate(nodes) if first[v] != k}
    if set(elimination_order) != dup or len(elimination_order) != len(dup):
        raise ContractError("elimination order must list each repeated position once")
    for k in elimination_order:
        a, b = prv[k], nxt[k]
        if b is None:
            nxt[a] = None
            right[a] = None
        else:
            right[a] = min(right[a], right[k])
            nxt[a] = b
            prv[b] = a
    order, out_w = [], []
    k = 0
    while k is not None:
        order.append(nodes[k])
        if nxt[k] is not None:
            out_w.append(right[k])
        k = nxt[k]
    return order, out_w


def linearize(t: SpanningTree, start=None, child_order: str = "deterministic", rng=None) -> LineGraph:
    """Turn a spanning tree into the weighted line used for prediction.

    A depth-first tour from ``start`` (default: the root) lists every
    traversed edge; repeated nodes are then removed, each stretch of removed
    nodes being replaced by its lightest edge. ``child_order='seeded'``
    shuffles the sibling visiting order with ``rng``.
    """
    check_tree(t)
    nodes, weights = depth_first_walk(t, start, child_order, rng)
    order, w = compact(nodes, weights)
    return make_line(order, w)


def line_cutsizes(line: LineGraph, y) -> tuple:
    """``(number, total weight)`` of line edges whose endpoints disagree."""
    y = as_labeling(y, line.n, complete=True)
    ly = y[line.order]
    cut = ly[1:] != ly[:-1]
    return int(cut.sum()), float(line.edge_weights[cut].sum())
