"""Spanning trees: five generators, inclusion estimates and diagnostics."""

from __future__ import annotations

import enum
import heapq
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from itertools import accumulate

import numpy as np

from .errors import ContractError, GraphError
from .graph import Graph, tree_resistance_distance
from .rng import UniformStream, as_generator

DEFAULT_SPST_ROOTS = 10


class TreeKind(str, enum.Enum):
    RST = "RST"
    NWRST = "NWRST"
    DFST = "DFST"
    MST = "MST"
    SPST = "SPST"

    @classmethod
    def parse(cls, name) -> "TreeKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).upper())
        except ValueError:
            raise ContractError(f"unknown tree kind {name!r}") from None


@dataclass(frozen=True, eq=False)
class SpanningTree:
    """Parent-array tree. ``parent[root] == root`` and ``parent_weight[root]`` is unused.

    ``parent_edge`` holds the source-graph edge id of each node's parent edge
    (-1 for the root) when the tree came from a graph.
    """

    root: int
    parent: np.ndarray
    parent_weight: np.ndarray
    parent_edge: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.parent)

    @cached_property
    def children(self) -> list:
        kids = [[] for _ in range(self.n)]
        for c, p in enumerate(self.parent.tolist()):
            if c != self.root:
                kids[p].append(c)
        return kids

    @cached_property
    def preorder(self) -> np.ndarray:
        order = []
        stack = [self.root]
        kids = self.children
        while stack:
            i = stack.pop()
            order.append(i)
            stack.extend(reversed(kids[i]))
        if len(order) != self.n:
            raise ContractError("parent array does not describe a connected tree")
        return np.array(order, dtype=np.int64)

    @cached_property
    def depth(self) -> list:
        d = [0] * self.n
        par = self.parent.tolist()
        for i in self.preorder.tolist()[1:]:
            d[i] = d[par[i]] + 1
        return d

    def edges(self):
        """Tree edges as ``(child, parent, weight)`` triples."""
        return [(c, int(self.parent[c]), float(self.parent_weight[c])) for c in range(self.n) if c != self.root]

    def edge_weights(self) -> np.ndarray:
        mask = np.arange(self.n) != self.root
        return self.parent_weight[mask]

    def neighbor_lists(self):
        """Undirected adjacency ``[(neighbour, weight), ...]`` per node, ids ascending."""
        nb = [[] for _ in range(self.n)]
        for c, p, w in self.edges():
            nb[c].append((p, w))
            nb[p].append((c, w))
        for lst in nb:
            lst.sort()
        return nb

    def as_graph(self) -> Graph:
        es = self.edges()
        if not es:
            return Graph(1, [], [], [])
        c, p, w = zip(*es)
        return Graph(self.n, c, p, w)

    def with_unit_weights(self) -> "SpanningTree":
        return SpanningTree(self.root, self.parent, np.ones(self.n), self.parent_edge)

    def scaled(self, alpha: float) -> "SpanningTree":
        return SpanningTree(self.root, self.parent, self.parent_weight * alpha, self.parent_edge)

    def rerooted(self, root: int) -> "SpanningTree":
        return tree_from_edges(self.n, self.edges(), root=root, parent_edges=self._edge_map())

    def _edge_map(self):
        if self.parent_edge is None:
            return None
        return {(min(c, p), max(c, p)): int(self.parent_edge[c]) for c, p, _ in self.edges()}

    def cost(self) -> float:
        """Total resistance, sum of reciprocal edge weights."""
        return float(np.sum(1.0 / self.edge_weights()))


def tree_from_parents(root: int, parent, parent_weight, parent_edge=None) -> SpanningTree:
    parent = np.asarray(parent, dtype=np.int64)
    if np.any(parent < 0) or np.any(parent >= len(parent)) or parent[root] != root:
        raise ContractError("invalid parent array")
    pw = np.asarray(parent_weight, dtype=np.float64).copy()
    pw[root] = 1.0
    pe = None if parent_edge is None else np.asarray(parent_edge, dtype=np.int64)
    for a in (parent, pw) + (() if pe is None else (pe,)):
        a.setflags(write=False)
    t = SpanningTree(int(root), parent, pw, pe)
    t.preorder  # validates connectivity / acyclicity
    return t


def tree_from_edges(n: int, edges, root: int = 0, parent_edges: dict | None = None) -> SpanningTree:
    """Orient an undirected edge set ``[(a, b, w), ...]`` away from ``root``."""
    edges = list(edges)
    if len(edges) != n - 1:
        raise ContractError(f"a spanning tree on {n} nodes needs {n - 1} edges, got {len(edges)}")
    nb = [[] for _ in range(n)]
    for a, b, w in edges:
        nb[a].append((b, w))
        nb[b].append((a, w))
    parent = np.full(n, -1, dtype=np.int64)
    pw = np.ones(n)
    pe = np.full(n, -1, dtype=np.int64) if parent_edges is not None else None
    parent[root] = root
    queue = deque([root])
    while queue:
        i = queue.popleft()
        for j, w in sorted(nb[i]):
            if parent[j] == -1:
                parent[j] = i
                pw[j] = w
                if pe is not None:
                    pe[j] = parent_edges[(min(i, j), max(i, j))]
                queue.append(j)
    if np.any(parent < 0):
        raise ContractError("edge set is not a spanning tree")
    return tree_from_parents(root, parent, pw, pe)


def tree_from_graph(g: Graph, root: int = 0) -> SpanningTree:
    """The unique spanning tree of a graph that already is a tree."""
    if g.m != g.n - 1 or not g.connected:
        raise GraphError("graph is not a tree")
    return tree_from_edges(g.n, g.edges, root=root, parent_edges=g.edge_index)


def check_tree(t: SpanningTree, g: Graph | None = None):
    """Raise ``ContractError`` unless ``t`` is a spanning tree (of ``g``, weights included)."""
    n = t.n
    if not (0 <= t.root < n) or t.parent[t.root] != t.root:
        raise ContractError("root must be its own parent")
    if np.any(t.parent < 0) or np.any(t.parent >= n):
        raise ContractError("parent index out of range")
    if len(t.preorder) != n:
        raise ContractError("tree is not connected")
    if np.any(t.edge_weights() <= 0):
        raise ContractError("tree weights must be positive")
    if g is not None:
        if g.n != n:
            raise ContractError("tree and graph have different node counts")
        for c, p, w in t.edges():
            e = g.edge_id(c, p)
            if g.w[e] != w:
                raise ContractError(f"tree edge ({c},{p}) weight {w} differs from graph weight {g.w[e]}")
            if t.parent_edge is not None and t.parent_edge[c] != e:
                raise ContractError(f"tree edge ({c},{p}) records the wrong edge id")


def _pick_root(g: Graph, rng, root):
    if root is None:
        return int(rng.integers(g.n))
    if not 0 <= root < g.n:
        raise ContractError("root out of range")
    return int(root)


def _wilson(g: Graph, rng, root, weighted: bool) -> SpanningTree:
    g.require_connected()
    rng = as_generator(rng)
    root = _pick_root(g, rng, root)
    nbrs, wts, eids = g.adjacency_lists
    n = g.n
    draw = UniformStream(rng, block=min(8192, 8 * n + 64)).next
    if weighted:
        cum = [list(accumulate(ws)) for ws in wts]
    in_tree = [False] * n
    in_tree[root] = True
    nxt = [-1] * n
    nxt_slot = [-1] * n
    for start in range(n):
        i = start
        while not in_tree[i]:
            if weighted:
                c = cum[i]
                k = bisect_right(c, draw() * c[-1])
                if k == len(c):
                    k -= 1
            else:
                k = min(int(draw() * len(nbrs[i])), len(nbrs[i]) - 1)
            nxt_slot[i] = k
            nxt[i] = nbrs[i][k]
            i = nxt[i]
        i = start
        while not in_tree[i]:
            in_tree[i] = True
            i = nxt[i]
    parent = nxt
    parent[root] = root
    pw = [1.0] * n
    pe = [-1] * n
    for i in range(n):
        if i != root:
            k = nxt_slot[i]
            pw[i] = wts[i][k]
            pe[i] = eids[i][k]
    return tree_from_parents(root, parent, pw, pe)


def sample_rst(g: Graph, rng=None, root: int | None = None) -> SpanningTree:
    """Weighted uniform spanning tree by Wilson's loop-erased random walks.

    A tree is drawn with probability proportional to the product of its edge
    weights; each walk step moves to a neighbour with probability
    proportional to the connecting edge weight.
    """
    return _wilson(g, rng, root, weighted=True)


def sample_nwrst(g: Graph, rng=None, root: int | None = None) -> SpanningTree:
    """Uniform spanning tree ignoring weights; the returned tree keeps graph weights."""
    return _wilson(g, rng, root, weighted=False)


def sample_dfst(g: Graph, rng=None, root: int | None = None) -> SpanningTree:
    """Randomized depth-first spanning tree.

    From the current node the next unvisited neighbour is drawn with
    probability proportional to the connecting edge weight; with no
    unvisited neighbour left the visit backtracks.
    """
    g.require_connected()
    rng = as_generator(rng)
    root = _pick_root(g, rng, root)
    nbrs, wts, eids = g.adjacency_lists
    n = g.n
    draw = UniformStream(rng, block=min(8192, 2 * n + 64)).next
    visited = [False] * n
    visited[root] = True
    parent = [-1] * n
    parent[root] = root
    pw = [1.0] * n
    pe = [-1] * n
    stack = [root]
    while stack:
        i = stack[-1]
        options = [k for k, j in enumerate(nbrs[i]) if not visited[j]]
        if not options:
            stack.pop()
            continue
        ws = wts[i]
        total = sum(ws[k] for k in options)
        x = draw() * total
        acc = 0.0
        pick = options[-1]
        for k in options:
            acc += ws[k]
            if x < acc:
                pick = k
                break
        j = nbrs[i][pick]
        visited[j] = True
        parent[j] = i
        pw[j] = ws[pick]
        pe[j] = eids[i][pick]
        stack.append(j)
    return tree_from_parents(root, parent, pw, pe)


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


def minimum_spanning_tree(g: Graph, root: int = 0) -> SpanningTree:
    """Kruskal on edge cost ``1/w``; equal costs are taken in edge-id order."""
    g.require_connected()
    cost = 1.0 / g.w
    order = np.lexsort((np.arange(g.m), cost))
    uf = UnionFind(g.n)
    chosen = []
    u, v, w = g.u.tolist(), g.v.tolist(), g.w.tolist()
    for e in order.tolist():
        if uf.union(u[e], v[e]):
            chosen.append((u[e], v[e], w[e]))
            if len(chosen) == g.n - 1:
                break
    return tree_from_edges(g.n, chosen, root=root, parent_edges=g.edge_index)


def dijkstra_tree(g: Graph, root: int) -> SpanningTree:
    """Shortest-path tree under edge length ``1/w``.

    A node's parent only changes on a strict improvement, and equal tentative
    distances leave the heap in node-id order.
    """
    g.require_connected()
    nbrs, wts, eids = g.adjacency_lists
    n = g.n
    dist = [float("inf")] * n
    dist[root] = 0.0
    parent = [-1] * n
    parent[root] = root
    pw = [1.0] * n
    pe = [-1] * n
    done = [False] * n
    heap = [(0.0, root)]
    while heap:
        d, i = heapq.heappop(heap)
        if done[i]:
            continue
        done[i] = True
        for j, w, e in zip(nbrs[i], wts[i], eids[i]):
            if done[j]:
                continue
            nd = d + 1.0 / w
            if nd < dist[j]:
                dist[j] = nd
                parent[j] = i
                pw[j] = w
                pe[j] = e
                heapq.heappush(heap, (nd, j))
    return tree_from_parents(root, parent, pw, pe)


def shortest_path_tree(g: Graph, rng=None, num_roots: int = DEFAULT_SPST_ROOTS) -> SpanningTree:
    """Minimum-diameter tree among shortest-path trees from random roots."""
    if num_roots < 1:
        raise ContractError("num_roots must be at least 1")
    g.require_connected()
    rng = as_generator(rng)
    k = min(num_roots, g.n)
    roots = rng.choice(g.n, size=k, replace=False).tolist()
    best, best_diam = None, float("inf")
    for r in roots:
        t = dijkstra_tree(g, r)
        d = tree_diameter(t)
        if d < best_diam:
            best, best_diam = t, d
    return best


def _farthest(nb, start):
    dist = {start: 0.0}
    stack = [start]
    while stack:
        i = stack.pop()
        for j, w in nb[i]:
            if j not in dist:
                dist[j] = dist[i] + 1.0 / w
                stack.append(j)
    far = max(dist, key=lambda k: (dist[k], -k))
    return far, dist[far]


def tree_diameter(t: SpanningTree) -> float:
    """Largest resistance distance between two tree nodes (double sweep)."""
    if t.n == 1:
        return 0.0
    nb = t.neighbor_lists()
    a, _ = _farthest(nb, t.root)
    _, d = _farthest(nb, a)
    return float(d)


def sample_tree(g: Graph, kind, rng=None, num_roots: int = DEFAULT_SPST_ROOTS) -> SpanningTree:
    kind = TreeKind.parse(kind)
    if kind is TreeKind.RST:
        return sample_rst(g, rng)
    if kind is TreeKind.NWRST:
        return sample_nwrst(g, rng)
    if kind is TreeKind.DFST:
        return sample_dfst(g, rng)
    if kind is TreeKind.MST:
        return minimum_spanning_tree(g)
    return shortest_path_tree(g, rng, num_roots)


@dataclass(frozen=True)
class InclusionEstimate:
    frequency: np.ndarray
    stderr: np.ndarray
    samples: int


def estimate_inclusion_probabilities(g: Graph, rng=None, samples: int = 10_000,
                                     sampler=sample_rst) -> InclusionEstimate:
    """Monte Carlo edge-inclusion frequencies over independent tree draws."""
    if samples < 1:
        raise ContractError("samples must be positive")
    rng = as_generator(rng)
    counts = np.zeros(g.m, dtype=np.int64)
    for _ in range(samples):
        t = sampler(g, rng)
        counts[t.parent_edge[t.parent_edge >= 0]] += 1
    f = counts / samples
    se = np.sqrt(f * (1 - f) / samples)
    return InclusionEstimate(frequency=f, stderr=se, samples=samples)


def write_tree(t: SpanningTree, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"root {t.root}\n")
        for c, p, w in t.edges():
            fh.write(f"{c} {p} {w!r}\n")


def read_tree(source) -> SpanningTree:
    """Parse the ``root r`` / ``child parent weight`` text format."""
    from .graph import _open_text

    root = None
    rows = []
    fh = _open_text(source)
    try:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "root" and len(parts) == 2:
                root = int(parts[1])
            elif len(parts) == 3:
                rows.append((int(parts[0]), int(parts[1]), float(parts[2])))
            else:
                raise GraphError(f"malformed tree line {lineno}")
    finally:
        if fh is not source:
            fh.close()
    if root is None:
        raise GraphError("tree file has no root line")
    n = len(rows) + 1
    parent = np.full(n, -1, dtype=np.int64)
    pw = np.ones(n)
    parent[root] = root
    for c, p, w in rows:
        if not (0 <= c < n and 0 <= p < n) or parent[c] != -1:
            raise GraphError(f"bad tree row for node {c}")
        parent[c] = p
        pw[c] = w
    try:
        return tree_from_parents(root, parent, pw)
    except ContractError as exc:
        raise GraphError(str(exc)) from None


__all__ = [
    "TreeKind", "SpanningTree", "sample_rst", "sample_nwrst", "sample_dfst",
    "minimum_spanning_tree", "shortest_path_tree", "dijkstra_tree", "tree_diameter",
    "sample_tree", "estimate_inclusion_probabilities", "InclusionEstimate",
    "tree_from_edges", "tree_from_graph", "tree_from_parents", "check_tree",
    "write_tree", "read_tree", "tree_resistance_distance",
]
