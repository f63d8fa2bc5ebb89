"""Datasets, k-NN graphs, splits, metrics and the benchmark loop."""

from __future__ import annotations

import csv
import io
import logging
import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .baselines import LabPropConfig, gpa_batch, labprop_batch, wmv_batch
from .errors import ContractError, GraphError
from .graph import Graph, _open_text, load_graph
from .linearize import linearize
from .rng import as_generator, spawn
from .trees import TreeKind, sample_tree
from .wta import run_batch

log = logging.getLogger(__name__)

DEFAULT_FRACTIONS = (0.05, 0.10, 0.25, 0.50)
ALGORITHMS = ("WTA", "NWWTA", "WMV", "LABPROP", "GPA")
TREE_ALGORITHMS = ("WTA", "NWWTA", "GPA")
CSV_HEADER = ["dataset", "task", "algo", "tree", "split", "seed", "error", "f1", "note"]


# ------------------------------------------------------------------ features


def load_features(source, class_column: int | None = None):
    """Read a numeric CSV (optional header row); returns ``(X, classes or None)``."""
    fh = _open_text(source)
    try:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    finally:
        if fh is not source:
            fh.close()
    if not rows:
        raise GraphError("feature file is empty")
    width = len(rows[0])
    skip = class_column % width if class_column is not None else -1
    try:
        [float(x) for i, x in enumerate(rows[0]) if i != skip]
    except ValueError:
        rows = rows[1:]  # header row
    if not rows:
        raise GraphError("feature file has a header but no rows")
    if any(len(r) != width for r in rows):
        raise GraphError("feature rows have different lengths")
    classes = None
    if class_column is not None:
        c = class_column % width
        classes = [r[c].strip() for r in rows]
        rows = [r[:c] + r[c + 1:] for r in rows]
    try:
        X = np.array(rows, dtype=np.float64)
    except ValueError as exc:
        raise GraphError(f"non-numeric feature value: {exc}") from None
    if not np.all(np.isfinite(X)):
        raise GraphError("feature values must be finite")
    return X, classes


def build_knn_graph(x, k: int) -> Graph:
    """k-NN graph with locally scaled Gaussian weights.

    ``sigma_i^2`` is the mean squared distance from row ``i`` to its ``k``
    nearest rows; an edge joins ``i`` and ``j`` when either is among the
    other's neighbours, with weight ``exp(-|x_i - x_j|^2 / ((sigma_i^2 + sigma_j^2) / 2))``.
    """
    X = np.asarray(x, dtype=np.float64)
    if X.ndim != 2:
        raise ContractError("features must be a 2-d array")
    n = len(X)
    if not 1 <= k < n:
        raise ContractError(f"k must lie in 1..{n - 1}")
    tree = cKDTree(X)
    dist, idx = tree.query(X, k=min(n, k + 1))
    nbr = np.empty((n, k), dtype=np.int64)
    nd = np.empty((n, k))
    for i in range(n):
        keep = idx[i] != i
        row_i, row_d = idx[i][keep][:k], dist[i][keep][:k]
        if len(row_i) < k:
            # i was not returned among its own k+1 nearest (duplicates)
            row_i, row_d = idx[i][:k], dist[i][:k]
        nbr[i], nd[i] = row_i, row_d
    sigma2 = (nd ** 2).mean(axis=1)
    a = np.repeat(np.arange(n), k)
    b = nbr.ravel()
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    pairs = np.unique(np.stack([lo, hi], axis=1), axis=0)
    u, v = pairs[:, 0], pairs[:, 1]
    sq = ((X[u] - X[v]) ** 2).sum(axis=1)
    s2 = (sigma2[u] + sigma2[v]) / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(sq == 0, 1.0, np.exp(-sq / s2))
    if np.any(w <= 0):
        raise GraphError("k-NN weight underflowed to zero; rescale the features")
    return Graph(n, u, v, w)


# ------------------------------------------------------------------ synthetic


def two_cluster_graph(n: int = 400, p_in: float = 0.02, p_out: float = 0.01,
                      w_in=(0.3, 1.0), w_out=(0.01, 0.2), ring: int = 2, communities: int = 5,
                      noise: float = 0.02, rng=None):
    """Stochastic block graph with two planted label classes.

    Each class is split into ``communities`` blocks and the ``2 * communities``
    blocks sit on a ring, alternating between the classes (one community per
    class gives the plain two-block model). Inside a block, nodes form a
    shuffled ring where each node links to its ``ring`` successors, plus
    random chords with probability ``p_in``; this keeps blocks connected and
    their trees long. Blocks adjacent on the ring are joined with probability
    ``p_out`` per node pair (one edge is forced). Within-block weights are
    uniform on ``w_in``, between-block weights on ``w_out``. Labels are the
    class signs, each flipped independently with probability ``noise``.
    Returns ``(graph, labels)``.
    """
    rng = as_generator(rng)
    nb = 2 * communities
    if communities < 1 or n < 2 * nb:
        raise ContractError("need communities >= 1 and at least two nodes per block")
    block = np.arange(n) * nb // n
    side = np.where(block % 2 == 0, 1, -1)
    pairs = set()
    for b in range(nb):
        cyc = rng.permutation(np.flatnonzero(block == b))
        for step in range(1, min(ring, len(cyc) - 1) + 1):
            for a, c in zip(cyc.tolist(), np.roll(cyc, -step).tolist()):
                pairs.add((min(a, c), max(a, c)))
    iu, ju = np.triu_indices(n, 1)
    bi, bj = block[iu], block[ju]
    same = bi == bj
    gap = np.abs(bi - bj)
    adjacent = (gap == 1) | (gap == nb - 1)
    keep = rng.random(len(iu)) < np.where(same, p_in, np.where(adjacent, p_out, 0.0))
    pairs.update(zip(iu[keep].tolist(), ju[keep].tolist()))
    for b in range(nb if nb > 2 else 1):
        c = (b + 1) % nb
        if not np.any(keep & (((bi == b) & (bj == c)) | ((bi == c) & (bj == b)))):
            a1 = int(rng.choice(np.flatnonzero(block == b)))
            a2 = int(rng.choice(np.flatnonzero(block == c)))
            pairs.add((min(a1, a2), max(a1, a2)))
    uv = np.array(sorted(pairs), dtype=np.int64)
    u, v = uv[:, 0], uv[:, 1]
    cross = block[u] != block[v]
    w = np.where(cross, rng.uniform(*w_out, size=len(u)), rng.uniform(*w_in, size=len(u)))
    y = side.astype(np.int8)
    y[rng.random(n) < noise] *= -1
    return Graph(n, u, v, w), y


# ------------------------------------------------------------------ splits / metrics


def make_split(nodes, fraction: float, rng=None):
    """Random train/test partition of ``nodes`` (an int ``n`` means ``range(n)``)."""
    if not 0 < fraction < 1:
        raise ContractError("fraction must lie strictly between 0 and 1")
    nodes = np.arange(nodes) if np.isscalar(nodes) else np.asarray(nodes, dtype=np.int64)
    size = int(math.floor(fraction * len(nodes) + 0.5))
    if size == 0 or size == len(nodes):
        raise ContractError(f"fraction {fraction} leaves an empty side for {len(nodes)} nodes")
    perm = as_generator(rng).permutation(nodes)
    return np.sort(perm[:size]), np.sort(perm[size:])


def evaluate(pred, truth, positive: int = 1) -> tuple:
    """``(error rate, F-measure of the positive class)``."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ContractError("predictions and truth differ in length")
    if len(truth) == 0:
        raise ContractError("empty test set")
    err = float(np.mean(pred != truth))
    tp = int(np.sum((pred == positive) & (truth == positive)))
    npred = int(np.sum(pred == positive))
    npos = int(np.sum(truth == positive))
    precision = tp / npred if npred else 0.0
    recall = tp / npos if npos else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return err, f1


def _as_sign(c):
    try:
        v = float(c)
    except (TypeError, ValueError):
        return 0
    return int(v) if v in (1.0, -1.0) else 0


def one_vs_rest(classes) -> dict:
    """Map each distinct class to a ±1 labeling (0 where the class is missing).

    Classes that are all ``+1``/``-1`` form a single task.
    """
    classes = list(classes)
    present = {c for c in classes if c is not None}
    if present and all(_as_sign(c) for c in present):
        # an already binary ±1 labeling is a single task, not two mirrored ones
        return {"+1": np.array([0 if c is None else _as_sign(c) for c in classes], dtype=np.int8)}
    tasks = {}
    for c in sorted({c for c in classes if c is not None}, key=str):
        tasks[str(c)] = np.array([0 if x is None else (1 if x == c else -1) for x in classes], dtype=np.int8)
    return tasks


def load_classes(source, n: int) -> list:
    """Read ``node class`` lines; nodes without a line get ``None``."""
    out = [None] * n
    fh = _open_text(source)
    try:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GraphError(f"malformed class line {lineno}")
            node = int(parts[0])
            if not 0 <= node < n:
                raise GraphError(f"class for unknown node {node} at line {lineno}")
            out[node] = parts[1]
    finally:
        if fh is not source:
            fh.close()
    return out


# ------------------------------------------------------------------ algorithms


_SPEC = re.compile(r"^(?:(\d+)\s*\*\s*)?([A-Z]+)(?:\s*\+\s*([A-Z]+))?$")


@dataclass(frozen=True)
class AlgorithmSpec:
    algo: str
    tree: TreeKind | None = None
    committee: int = 1

    @classmethod
    def parse(cls, text: str) -> "AlgorithmSpec":
        m = _SPEC.match(text.strip().upper())
        if not m:
            raise ContractError(f"cannot parse algorithm spec {text!r}")
        k, algo, tree = m.groups()
        if algo not in ALGORITHMS:
            raise ContractError(f"unknown algorithm {algo!r}")
        k = int(k) if k else 1
        if k < 1 or k % 2 == 0:
            raise ContractError("committee size must be a positive odd number")
        if algo in TREE_ALGORITHMS:
            tree = TreeKind.parse(tree or "RST")
        elif tree is not None or k != 1:
            raise ContractError(f"{algo} uses neither spanning trees nor committees")
        return cls(algo, tree, k)

    @property
    def label(self) -> str:
        return self.algo if self.committee == 1 else f"{self.committee}*{self.algo}"

    def __str__(self):
        s = self.label
        return s if self.tree is None else f"{s}+{self.tree.value}"


def predict_with(spec: AlgorithmSpec, g: Graph, trees, train, test, labprop: LabPropConfig = LabPropConfig()):
    """Predictions of one algorithm spec; ``trees`` holds ``spec.committee`` spanning trees."""
    if spec.algo == "WMV":
        return wmv_batch(g, train, test)
    if spec.algo == "LABPROP":
        return labprop_batch(g, train, test, labprop)
    votes = np.zeros(len(test), dtype=np.int64)
    for t in trees:
        if spec.algo == "GPA":
            votes += gpa_batch(t, train, test)
        else:
            tt = t.with_unit_weights() if spec.algo == "NWWTA" else t
            votes += run_batch(linearize(tt), train, test)
    return np.where(votes >= 0, 1, -1).astype(np.int8)


# ------------------------------------------------------------------ benchmark


@dataclass
class BenchmarkConfig:
    algorithms: list
    fractions: tuple = DEFAULT_FRACTIONS
    seeds: tuple = (0,)
    dataset: str = "dataset"
    graph: Graph | None = None
    graph_path: str | None = None
    synthetic: int | None = None  # node count for the two-cluster generator
    features_path: str | None = None
    k: int = 10
    labels_path: str | None = None
    classes: list | None = None
    class_column: int | None = None
    base_seed: int = 0
    labprop: LabPropConfig = field(default_factory=LabPropConfig)

    def __post_init__(self):
        self.algorithms = [a if isinstance(a, AlgorithmSpec) else AlgorithmSpec.parse(a) for a in self.algorithms]
        if not self.algorithms:
            raise ContractError("at least one algorithm is required")
        self.fractions = tuple(float(f) for f in self.fractions)
        if any(not 0 < f < 1 for f in self.fractions):
            raise ContractError("training fractions must lie in (0, 1)")
        self.seeds = tuple(int(s) for s in self.seeds)

    def load(self):
        """Resolve the graph and class assignment."""
        g, classes = self.graph, self.classes
        if g is None:
            if self.synthetic:
                g, y = two_cluster_graph(self.synthetic, rng=np.random.SeedSequence([self.base_seed, 2**31]))
                classes = classes or y.tolist()
            elif self.graph_path:
                g = load_graph(self.graph_path)
            elif self.features_path:
                X, feat_classes = load_features(self.features_path, self.class_column)
                g = build_knn_graph(X, self.k)
                classes = classes or feat_classes
            else:
                raise ContractError("config names no graph source (graph, features or synthetic)")
        if classes is None:
            if not self.labels_path:
                raise ContractError("config names no labels")
            classes = load_classes(self.labels_path, g.n)
        return g, classes


def _parse_list(value: str):
    return [x.strip() for x in re.split(r"[,;]", value) if x.strip()]


def load_config(path) -> BenchmarkConfig:
    """Read ``key = value`` lines (``#`` comments).

    Keys: ``dataset``, ``graph`` or ``features`` (+ ``k``, ``class_column``)
    or ``synthetic`` (node count), ``labels``, ``algorithms``, ``fractions``,
    ``seeds`` or ``permutations`` (a count, meaning seeds ``0..count-1``), ``base_seed``,
    ``labprop_tolerance``, ``labprop_max_iterations``. Relative paths are
    resolved against the config file's directory.
    """
    import os

    base = os.path.dirname(os.path.abspath(path))
    kv = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ContractError(f"config line {lineno} is not 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            kv[key.lower()] = value

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    if "permutations" in kv and "seeds" not in kv:
        kv["seeds"] = ",".join(str(i) for i in range(int(kv["permutations"])))
    try:
        return BenchmarkConfig(
            algorithms=_parse_list(kv.get("algorithms", "")),
            fractions=tuple(float(x) for x in _parse_list(kv.get("fractions", "0.05,0.10,0.25,0.50"))),
            seeds=tuple(int(x) for x in _parse_list(kv.get("seeds", "0"))),
            dataset=kv.get("dataset", "dataset"),
            graph_path=resolve(kv["graph"]) if "graph" in kv else None,
            synthetic=int(kv["synthetic"]) if "synthetic" in kv else None,
            features_path=resolve(kv["features"]) if "features" in kv else None,
            k=int(kv.get("k", 10)),
            labels_path=resolve(kv["labels"]) if "labels" in kv else None,
            class_column=int(kv["class_column"]) if "class_column" in kv else None,
            base_seed=int(kv.get("base_seed", 0)),
            labprop=LabPropConfig(float(kv.get("labprop_tolerance", 1e-6)),
                                  int(kv.get("labprop_max_iterations", 10_000))),
        )
    except ValueError as exc:
        raise ContractError(f"bad config value: {exc}") from None


@dataclass
class MetricsReport:
    rows: list  # dicts with the CSV_HEADER keys
    cells: dict  # (algo, split) -> {"error": (mean, std), "f1": (mean, std), "per_seed": [...]}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([_fmt(r[k]) for k in CSV_HEADER])
        return buf.getvalue()

    def summary(self) -> str:
        lines = ["algo,split,error_mean,error_std,f1_mean,f1_std"]
        for (algo, split), c in self.cells.items():
            lines.append(f"{algo},{split},{c['error'][0]:.4f},{c['error'][1]:.4f},{c['f1'][0]:.4f},{c['f1'][1]:.4f}")
        return "\n".join(lines) + "\n"


def _fmt(x):
    if isinstance(x, float):
        return "nan" if math.isnan(x) else f"{x:.6f}"
    return str(x)


def _tree_seed(cfg, seed, kind, member):
    kinds = list(TreeKind)
    return np.random.SeedSequence([cfg.base_seed, seed, 1 + kinds.index(kind), member])


def run_benchmark(cfg: BenchmarkConfig, out=None) -> MetricsReport:
    """Seeds x tasks x training fractions x algorithms.

    For every seed a node permutation fixes the splits (the first
    ``round(fraction * n)`` labelled nodes train) and each tree kind is drawn
    once per committee member, shared by all tasks and fractions. A failing
    cell becomes a row with ``nan`` metrics and the error message in ``note``.
    """
    g, classes = cfg.load()
    tasks = one_vs_rest(classes)
    labelled = np.array([i for i, c in enumerate(classes) if c is not None], dtype=np.int64)
    rows = []
    for seed in cfg.seeds:
        perm = as_generator(np.random.SeedSequence([cfg.base_seed, seed, 0])).permutation(labelled)
        trees = {}
        for spec in cfg.algorithms:
            if spec.tree is None:
                continue
            have = trees.setdefault(spec.tree, [])
            for member in range(len(have), spec.committee):
                try:
                    have.append(sample_tree(g, spec.tree, _tree_seed(cfg, seed, spec.tree, member)))
                except Exception as exc:  # recorded per row below
                    log.warning("tree %s failed: %s", spec.tree.value, exc)
                    have.append(exc)
        for task, y in tasks.items():
            for frac in cfg.fractions:
                size = int(math.floor(frac * len(perm) + 0.5))
                train_nodes, test_nodes = perm[:size], perm[size:]
                train = [(int(v), int(y[v])) for v in train_nodes]
                for spec in cfg.algorithms:
                    row = {"dataset": cfg.dataset, "task": task, "algo": spec.label,
                           "tree": spec.tree.value if spec.tree else "-", "split": f"{frac:.2f}",
                           "seed": seed, "error": float("nan"), "f1": float("nan"), "note": ""}
                    try:
                        if size == 0 or size == len(perm):
                            raise ContractError("split leaves an empty side")
                        ts = trees.get(spec.tree, [])[:spec.committee]
                        bad = [t for t in ts if isinstance(t, Exception)]
                        if bad:
                            raise bad[0]
                        pred = predict_with(spec, g, ts, train, test_nodes, cfg.labprop)
                        row["error"], row["f1"] = evaluate(pred, y[test_nodes])
                    except Exception as exc:
                        row["note"] = f"{type(exc).__name__}: {exc}".replace(",", ";")
                        log.warning("cell %s/%s/%s failed: %s", task, spec, frac, exc)
                    rows.append(row)
    report = MetricsReport(rows=rows, cells=summarize(rows))
    if out is not None:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(report.to_csv())
    return report


def summarize(rows) -> dict:
    """Macro-average over tasks per seed, then mean and std over seeds."""
    per = {}
    for r in rows:
        key = (f"{r['algo']}+{r['tree']}" if r["tree"] != "-" else r["algo"], r["split"])
        per.setdefault(key, {}).setdefault(r["seed"], []).append((r["error"], r["f1"]))
    cells = {}
    for key, by_seed in per.items():
        macro = [(float(np.mean([e for e, _ in v])), float(np.mean([f for _, f in v]))) for _, v in sorted(by_seed.items())]
        errs = np.array([e for e, _ in macro])
        f1s = np.array([f for _, f in macro])
        cells[key] = {"error": (float(errs.mean()), float(errs.std())),
                      "f1": (float(f1s.mean()), float(f1s.std())), "per_seed": macro}
    return cells
