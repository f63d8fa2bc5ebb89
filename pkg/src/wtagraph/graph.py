"""Weighted graphs, labelings, cutsizes and effective resistances."""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np
import scipy.linalg

from .errors import ContractError, GraphError

DENSE_NODE_CAP = 2000
MAX_CONDITION = 1e14

UNKNOWN = 0


class Graph:
    """Undirected simple graph with strictly positive edge weights.

    Edges keep the order in which they were given; that position is the
    edge id used by every per-edge table in the package.
    """

    def __init__(self, n: int, u, v, w):
        u = np.asarray(u, dtype=np.int64).ravel()
        v = np.asarray(v, dtype=np.int64).ravel()
        w = np.asarray(w, dtype=np.float64).ravel()
        if not (len(u) == len(v) == len(w)):
            raise GraphError("edge arrays have different lengths")
        if n < 1:
            raise GraphError("a graph needs at least one node")
        if len(u) and (min(u.min(), v.min()) < 0 or max(u.max(), v.max()) >= n):
            raise GraphError("edge endpoint out of range")
        if np.any(u == v):
            raise GraphError(f"self-loop on node {int(u[np.argmax(u == v)])}")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise GraphError("edge weights must be finite and strictly positive")
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        keys = lo * n + hi
        if len(np.unique(keys)) != len(keys):
            raise GraphError("duplicate edge")

        self.n = int(n)
        self.u, self.v, self.w = u, v, w
        for a in (self.u, self.v, self.w):
            a.setflags(write=False)

        # CSR adjacency, neighbours of each node in edge-id order
        ends = np.concatenate([u, v])
        others = np.concatenate([v, u])
        eids = np.concatenate([np.arange(len(u)), np.arange(len(u))])
        order = np.lexsort((eids, ends))
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(ends, minlength=n), out=self.indptr[1:])
        self.indices = others[order]
        self.edge_ids = eids[order]
        self.adj_weights = w[self.edge_ids]
        for a in (self.indptr, self.indices, self.edge_ids, self.adj_weights):
            a.setflags(write=False)
        self.connected = self._check_connected()

    @property
    def m(self) -> int:
        return len(self.u)

    @property
    def edges(self):
        return list(zip(self.u.tolist(), self.v.tolist(), self.w.tolist()))

    def degree(self, i: int) -> int:
        return int(self.indptr[i + 1] - self.indptr[i])

    def neighbors(self, i: int):
        """Return ``(neighbour ids, weights, edge ids)`` of node ``i``."""
        s, e = self.indptr[i], self.indptr[i + 1]
        return self.indices[s:e], self.adj_weights[s:e], self.edge_ids[s:e]

    @cached_property
    def adjacency_lists(self):
        # Plain-Python copies for the samplers' inner loops.
        ip = self.indptr.tolist()
        nb = self.indices.tolist()
        wt = self.adj_weights.tolist()
        ed = self.edge_ids.tolist()
        return (
            [nb[ip[i]:ip[i + 1]] for i in range(self.n)],
            [wt[ip[i]:ip[i + 1]] for i in range(self.n)],
            [ed[ip[i]:ip[i + 1]] for i in range(self.n)],
        )

    @cached_property
    def edge_index(self) -> dict:
        return {(min(a, b), max(a, b)): k for k, (a, b) in enumerate(zip(self.u.tolist(), self.v.tolist()))}

    def edge_id(self, a: int, b: int) -> int:
        try:
            return self.edge_index[(min(a, b), max(a, b))]
        except KeyError:
            raise GraphError(f"no edge between {a} and {b}") from None

    def laplacian(self) -> np.ndarray:
        L = np.zeros((self.n, self.n))
        np.add.at(L, (self.u, self.v), -self.w)
        np.add.at(L, (self.v, self.u), -self.w)
        L[np.diag_indices(self.n)] = -L.sum(axis=1)
        return L

    def scaled(self, alpha: float) -> "Graph":
        return Graph(self.n, self.u, self.v, self.w * alpha)

    def unit_weights(self) -> "Graph":
        return Graph(self.n, self.u, self.v, np.ones(self.m))

    def _check_connected(self) -> bool:
        seen = np.zeros(self.n, dtype=bool)
        seen[0] = True
        stack = [0]
        ip, nb = self.indptr, self.indices
        while stack:
            i = stack.pop()
            for j in nb[ip[i]:ip[i + 1]]:
                if not seen[j]:
                    seen[j] = True
                    stack.append(int(j))
        return bool(seen.all())

    def require_connected(self):
        if not self.connected:
            raise GraphError("graph is not connected")

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m}, connected={self.connected})"


def _open_text(source):
    """A path, literal text (anything containing a newline) or an open file."""
    if isinstance(source, os.PathLike) or (isinstance(source, str) and "\n" not in source):
        return open(source, encoding="utf-8")
    if isinstance(source, str):
        return io.StringIO(source)
    return source


def load_graph(source) -> Graph:
    """Parse a ``u v w`` edge list (path, literal text with newlines, or open file).

    Blank lines and ``#`` comments are skipped. Node ids are 0-based and the
    node count is the largest id plus one.
    """
    us, vs, ws = [], [], []
    seen = {}
    fh = _open_text(source)
    try:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise GraphError(f"malformed line {lineno}: expected 'u v w'")
            try:
                a, b = int(parts[0]), int(parts[1])
                x = float(parts[2])
            except ValueError:
                raise GraphError(f"malformed line {lineno}: {line!r}") from None
            if a < 0 or b < 0:
                raise GraphError(f"negative node id at line {lineno}")
            if not np.isfinite(x) or x <= 0:
                raise GraphError(f"non-positive weight at line {lineno}")
            if a == b:
                raise GraphError(f"self-loop at line {lineno}")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise GraphError(f"duplicate edge at line {lineno} (first seen at line {seen[key]})")
            seen[key] = lineno
            us.append(a)
            vs.append(b)
            ws.append(x)
    finally:
        if fh is not source:
            fh.close()
    if not us:
        raise GraphError("edge list is empty")
    n = max(max(us), max(vs)) + 1
    return Graph(n, us, vs, ws)


def write_graph(g: Graph, path):
    with open(path, "w", encoding="utf-8") as fh:
        for a, b, x in g.edges:
            fh.write(f"{a} {b} {x!r}\n")


def load_labels(source, n: int) -> np.ndarray:
    """Read ``u ±1`` lines into a labeling; absent nodes are unknown (0)."""
    y = np.zeros(n, dtype=np.int8)
    fh = _open_text(source)
    try:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GraphError(f"malformed label line {lineno}")
            try:
                node, lab = int(parts[0]), int(float(parts[1]))
            except ValueError:
                raise GraphError(f"malformed label line {lineno}: {line!r}") from None
            if not 0 <= node < n:
                raise GraphError(f"label for unknown node {node} at line {lineno}")
            if lab not in (-1, 1):
                raise GraphError(f"label must be +1 or -1 at line {lineno}")
            y[node] = lab
    finally:
        if fh is not source:
            fh.close()
    return y


def write_labels(y, path, header: Iterable[str] = ()):
    with open(path, "w", encoding="utf-8") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        for i, lab in enumerate(np.asarray(y).tolist()):
            if lab != UNKNOWN:
                fh.write(f"{i} {'+1' if lab > 0 else '-1'}\n")


def as_labeling(y, n: int | None = None, *, complete: bool = False) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ContractError("labeling must be one-dimensional")
    if n is not None and len(y) != n:
        raise ContractError(f"labeling has length {len(y)}, graph has {n} nodes")
    if not np.isin(y, (-1, 0, 1)).all():
        raise ContractError("labels must be -1, +1 or 0 (unknown)")
    if complete and np.any(y == UNKNOWN):
        raise ContractError("labeling contains unknown labels")
    return y.astype(np.int8, copy=False)


def phi_edges(g: Graph, y) -> np.ndarray:
    """Boolean mask over edge ids marking edges with disagreeing labels."""
    y = as_labeling(y, g.n, complete=True)
    return y[g.u] != y[g.v]


def cutsize(g: Graph, y) -> int:
    return int(phi_edges(g, y).sum())


def weighted_cutsize(g: Graph, y) -> float:
    return float(g.w[phi_edges(g, y)].sum())


@dataclass(frozen=True)
class ResistanceTable:
    """Per-edge effective resistance ``r`` and inclusion probability ``p = w r``."""

    r: np.ndarray
    p: np.ndarray
    n: int
    condition: float

    def check(self, g: Graph):
        if len(self.p) != g.m or self.n != g.n:
            raise ContractError("resistance table does not belong to this graph")


def _grounded_inverse(g: Graph, max_nodes: int, max_condition: float):
    """Inverse of the Laplacian with the last node grounded, padded with zeros."""
    g.require_connected()
    if g.n > max_nodes:
        raise GraphError(
            f"dense resistance solve limited to {max_nodes} nodes (graph has {g.n}); "
            "use estimate_inclusion_probabilities instead"
        )
    n = g.n
    M = np.zeros((n, n))
    if n == 1:
        return M, 1.0
    Lg = g.laplacian()[:-1, :-1]
    try:
        factor = scipy.linalg.cho_factor(Lg, lower=True)
    except np.linalg.LinAlgError as exc:
        raise GraphError(f"grounded Laplacian is not positive definite: {exc}") from None
    inv = scipy.linalg.cho_solve(factor, np.eye(n - 1))
    cond = float(np.abs(Lg).sum(axis=0).max() * np.abs(inv).sum(axis=0).max())
    if not np.isfinite(cond) or cond > max_condition:
        raise GraphError(f"grounded Laplacian is ill-conditioned (1-norm condition {cond:.3g})")
    M[:-1, :-1] = inv
    return M, cond


def resistance_matrix(g: Graph, max_nodes: int = DENSE_NODE_CAP, max_condition: float = MAX_CONDITION) -> np.ndarray:
    """All-pairs effective resistances by a dense grounded solve."""
    M, _ = _grounded_inverse(g, max_nodes, max_condition)
    d = np.diag(M)
    return d[:, None] + d[None, :] - 2 * M


def effective_resistances(g: Graph, max_nodes: int = DENSE_NODE_CAP,
                          max_condition: float = MAX_CONDITION) -> ResistanceTable:
    M, cond = _grounded_inverse(g, max_nodes, max_condition)
    d = np.diag(M)
    r = d[g.u] + d[g.v] - 2 * M[g.u, g.v]
    p = g.w * r
    r.setflags(write=False)
    p.setflags(write=False)
    return ResistanceTable(r=r, p=p, n=g.n, condition=cond)


def expected_tree_cutsize(g: Graph, y, rt: ResistanceTable) -> float:
    """Expected number of disagreeing edges in a weighted random spanning tree."""
    rt.check(g)
    return float(rt.p[phi_edges(g, y)].sum())


def tree_resistance_distance(t, i: int, j: int) -> float:
    """Sum of reciprocal weights along the tree path between ``i`` and ``j``."""
    n = len(t.parent)
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError("node index out of range")
    depth = t.depth
    parent = t.parent
    total = 0.0
    while i != j:
        if depth[i] >= depth[j]:
            total += 1.0 / t.parent_weight[i]
            i = parent[i]
        else:
            total += 1.0 / t.parent_weight[j]
            j = parent[j]
    return float(total)
