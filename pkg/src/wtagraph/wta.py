"""Nearest-neighbour prediction on a weighted line in constant amortized time.

The line positions are the leaves of a complete binary index tree (padded to
a power of two). A node of the index tree is marked when its subtree holds a
revealed leaf, and revealed leaves are chained in a doubly-linked list in
line order. To find the revealed neighbours of a position we climb to the
first marked ancestor, descend on the other side towards the position, and
take one step along the list.
"""

from __future__ import annotations

import csv
import io
from array import array
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .graph import Graph, as_labeling
from .linearize import LineGraph, linearize
from .rng import as_generator, spawn
from .trees import TreeKind, sample_tree

DEFAULT_LABEL = 1
# relative gap under which two candidate distances count as equal
TIE_RTOL = 1e-9


class WTAPredictor:
    """Online state over one line. Positions are line positions, not node ids."""

    def __init__(self, line: LineGraph):
        n = line.n
        if n < 1:
            raise ContractError("line must have at least one node")
        self.line = line
        self.n = n
        self.size = 1 << max(0, (n - 1).bit_length())
        self.marks = bytearray(2 * self.size)
        # flat typed arrays keep the working set compact for large lines
        self.prev = array("l", [-1]) * n
        self.next = array("l", [-1]) * n
        self.label = array("b", [0]) * n
        self.revealed_count = 0
        self.visit_counter = 0
        # prefix resistances split into float hi/lo parts: keeps the extended
        # precision while staying in cheap Python floats
        hi = line.prefix_resistance.astype(np.float64)
        self._hi = array("d", hi.tobytes())
        self._lo = array("d", (line.prefix_resistance - hi).astype(np.float64).tobytes())
        self._pending = None

    @property
    def padding(self) -> int:
        return self.size - self.n

    def is_revealed(self, pos: int) -> bool:
        return self.label[pos] != 0

    def _check(self, pos: int):
        if not 0 <= pos < self.n:
            raise ContractError(f"position {pos} out of range")
        if self.label[pos] != 0:
            raise ContractError(f"position {pos} is already revealed")

    def _locate(self, pos: int):
        """Unmarked ancestors of ``pos`` plus its revealed left/right neighbours."""
        marks = self.marks
        size = self.size
        path = []
        child = size + pos
        node = child >> 1
        visits = 0
        while node:
            visits += 1
            if marks[node]:
                break
            path.append(node)
            child = node
            node >>= 1
        if not node:
            # leaf-only tree, or nothing revealed yet
            self.visit_counter += visits
            return path, -1, -1
        x = child ^ 1
        visits += 1
        if child & 1:
            # came up from the right: rightmost marked leaf on the left
            while x < size:
                x = 2 * x + 1 if marks[2 * x + 1] else 2 * x
                visits += 1
            left = x - size
            right = self.next[left]
        else:
            while x < size:
                x = 2 * x if marks[2 * x] else 2 * x + 1
                visits += 1
            right = x - size
            left = self.prev[right]
        self.visit_counter += visits
        return path, left, right

    def neighbors(self, pos: int):
        """Closest revealed positions on each side of ``pos`` (-1 when absent)."""
        self._check(pos)
        path, left, right = self._locate(pos)
        self._pending = (pos, path, left, right)
        return left, right

    def predict(self, pos: int) -> int:
        left, right = self.neighbors(pos)
        return self._decide(pos, left, right)

    def _decide(self, pos, left, right) -> int:
        if left < 0 and right < 0:
            return DEFAULT_LABEL
        if right < 0:
            return self.label[left]
        if left < 0:
            return self.label[right]
        ll, lr = self.label[left], self.label[right]
        if ll == lr:
            return ll
        hi, lo = self._hi, self._lo
        dl = (hi[pos] - hi[left]) + (lo[pos] - lo[left])
        dr = (hi[right] - hi[pos]) + (lo[right] - lo[pos])
        if abs(dl - dr) <= TIE_RTOL * max(dl, dr):
            return ll
        return ll if dl < dr else lr

    def reveal(self, pos: int, label: int):
        self._check(pos)
        if label not in (-1, 1):
            raise ContractError("revealed labels must be +1 or -1")
        pending = self._pending
        if pending is not None and pending[0] == pos:
            _, path, left, right = pending
        else:
            path, left, right = self._locate(pos)
        self._pending = None
        marks = self.marks
        marks[self.size + pos] = 1
        for node in path:
            marks[node] = 1
        self.prev[pos] = left
        self.next[pos] = right
        if left >= 0:
            self.next[left] = pos
        if right >= 0:
            self.prev[right] = pos
        self.label[pos] = label
        self.revealed_count += 1

    def revealed_positions(self) -> list:
        """Walk the revealed list from its left end."""
        if not self.revealed_count:
            return []
        start = next(i for i in range(self.n) if self.label[i] and self.prev[i] < 0)
        out = []
        i = start
        while i >= 0:
            out.append(i)
            i = self.next[i]
        return out


def new_predictor(line: LineGraph) -> WTAPredictor:
    return WTAPredictor(line)


@dataclass(frozen=True)
class OnlineTrace:
    nodes: np.ndarray
    predicted: np.ndarray
    truth: np.ndarray
    visits: int = 0

    @property
    def mistake(self) -> np.ndarray:
        return self.predicted != self.truth

    @property
    def mistakes(self) -> int:
        return int(self.mistake.sum())

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "node", "predicted", "true", "mistake"])
        for step, (v, p, t) in enumerate(zip(self.nodes.tolist(), self.predicted.tolist(), self.truth.tolist())):
            w.writerow([step, v, p, t, int(p != t)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def _as_permutation(order, n: int) -> np.ndarray:
    order = np.asarray(order, dtype=np.int64)
    if len(order) != n or not np.array_equal(np.sort(order), np.arange(n)):
        raise ContractError("presentation order must be a permutation of the nodes")
    return order


def run_online(line: LineGraph, y, order=None) -> OnlineTrace:
    """Predict every node in ``order`` (node ids), revealing each true label after."""
    y = as_labeling(y, line.n, complete=True)
    order = np.arange(line.n) if order is None else _as_permutation(order, line.n)
    s = WTAPredictor(line)
    pos_of = line.position.tolist()
    yl = y.tolist()
    preds = []
    for v in order.tolist():
        p = pos_of[v]
        preds.append(s.predict(p))
        s.reveal(p, yl[v])
    return OnlineTrace(order, np.array(preds, dtype=np.int8), y[order], s.visit_counter)


def _train_items(train):
    if isinstance(train, dict):
        return list(train.items())
    return [(int(v), int(lab)) for v, lab in train]


def run_batch(line: LineGraph, train, test) -> np.ndarray:
    """Reveal all training labels, then predict each test node without feedback.

    ``train`` is a mapping or iterable of ``(node, label)``; the result is
    aligned with ``test``.
    """
    items = _train_items(train)
    test = [int(v) for v in test]
    train_nodes = {v for v, _ in items}
    if len(train_nodes) != len(items):
        raise ContractError("training set lists a node twice")
    if train_nodes.intersection(test):
        raise ContractError("training and test sets overlap")
    s = WTAPredictor(line)
    pos_of = line.position
    for v, lab in items:
        s.reveal(int(pos_of[v]), lab)
    return np.array([s.predict(int(pos_of[v])) for v in test], dtype=np.int8)


def tree_line(g: Graph, kind, rng=None, weighted: bool = True) -> LineGraph:
    """Sample a spanning tree of ``kind`` and linearize it.

    With ``weighted=False`` all weights count as 1 at prediction time.
    """
    t = sample_tree(g, kind, rng)
    if not weighted:
        t = t.with_unit_weights()
    return linearize(t)


def committee_predict(g: Graph, kind, k: int, train, test, rng=None, weighted: bool = True) -> np.ndarray:
    """Majority vote of ``k`` batch WTA runs on independently drawn trees."""
    if k < 1 or k % 2 == 0:
        raise ContractError("committee size must be a positive odd number")
    kind = TreeKind.parse(kind)
    items = _train_items(train)
    votes = None
    for stream in spawn(rng, k):
        pred = run_batch(tree_line(g, kind, stream, weighted), items, test).astype(np.int64)
        votes = pred if votes is None else votes + pred
    return np.where(votes >= 0, 1, -1).astype(np.int8)


class WTALearner:
    """Online WTA over graph node ids: one tree drawn up front, then NN on its line."""

    name = "WTA"

    def __init__(self, g: Graph, rng=None, kind=TreeKind.RST, weighted: bool = True):
        self.line = tree_line(g, kind, as_generator(rng), weighted)
        self.state = WTAPredictor(self.line)
        self._pos = self.line.position

    def predict(self, node: int) -> int:
        return self.state.predict(int(self._pos[node]))

    def reveal(self, node: int, label: int):
        self.state.reveal(int(self._pos[node]), label)
