"""Command-line entry point: ``wtagraph <subcommand> ...``.

Exit status is 0 on success, 2 for unusable input (bad files, arguments or
graphs) and 3 when a computation fails at run time.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .errors import ContractError, GraphError
from .graph import load_graph, load_labels, write_graph
from .harness import (AlgorithmSpec, build_knn_graph, evaluate, load_config, load_features,
                      make_split, predict_with, run_benchmark)
from .rng import as_generator, spawn
from .trees import TreeKind, sample_tree, write_tree

log = logging.getLogger("wtagraph")

TREE_CHOICES = [k.value.lower() for k in TreeKind]


class InputError(Exception):
    pass


def _read_graph(path):
    try:
        return load_graph(path)
    except OSError as exc:
        raise InputError(f"cannot read graph: {exc}") from None


def _read_labels(path, n):
    try:
        return load_labels(path, n)
    except OSError as exc:
        raise InputError(f"cannot read labels: {exc}") from None


def cmd_build_knn(args):
    try:
        X, classes = load_features(args.input, args.class_column)
    except OSError as exc:
        raise InputError(f"cannot read features: {exc}") from None
    g = build_knn_graph(X, args.k)
    write_graph(g, args.out)
    if args.classes_out and classes is not None:
        with open(args.classes_out, "w", encoding="utf-8") as fh:
            for i, c in enumerate(classes):
                fh.write(f"{i} {c}\n")
    print(f"{g.n} nodes, {g.m} edges -> {args.out}")


def cmd_tree(args):
    g = _read_graph(args.graph)
    t = sample_tree(g, args.kind, np.random.SeedSequence(args.seed))
    write_tree(t, args.out)
    print(f"{args.kind.upper()} tree on {t.n} nodes, root {t.root} -> {args.out}")


def _split_labels(y, frac, seed):
    labelled = np.flatnonzero(y != 0)
    if len(labelled) < 2:
        raise InputError("need at least two labelled nodes")
    rng = as_generator(np.random.SeedSequence([seed, 0]))
    train, test = make_split(labelled, frac, rng)
    # training labels are presented in a random order, as in an online pass
    train = rng.permutation(train)
    return [(int(v), int(y[v])) for v in train], test


def _report(nodes, pred, y, out):
    err, f1 = evaluate(pred, y[nodes])
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write("node,predicted,true\n")
            for v, p in zip(nodes.tolist(), pred.tolist()):
                fh.write(f"{v},{p},{int(y[v])}\n")
    print(json.dumps({"test_nodes": int(len(nodes)), "error": round(err, 6), "f1": round(f1, 6)}))


def _predict(args, algo, size):
    g = _read_graph(args.graph)
    y = _read_labels(args.labels, g.n)
    spec = AlgorithmSpec.parse(f"{size}*{algo.upper()}+{args.tree_kind.upper()}" if algo.upper() in ("WTA", "NWWTA", "GPA")
                               else algo.upper())
    train, test = _split_labels(y, args.train_frac, args.seed)
    trees = []
    if spec.tree is not None:
        trees = [sample_tree(g, spec.tree, s) for s in spawn(np.random.SeedSequence([args.seed, 1]), spec.committee)]
    pred = predict_with(spec, g, trees, train, test)
    _report(test, pred, y, args.out)


def cmd_predict(args):
    _predict(args, args.algo, 1)


def cmd_committee(args):
    if args.size < 1 or args.size % 2 == 0:
        raise InputError("committee size must be a positive odd number")
    _predict(args, args.algo, args.size)


def cmd_adversary(args):
    from .bounds import adversarial_labeling

    g = _read_graph(args.graph)
    inst = adversarial_labeling(g, args.budget, np.random.SeedSequence(args.seed))
    if args.out:
        inst.write(args.out)
    print(json.dumps(inst.metadata()))


def cmd_bench(args):
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        raise InputError(f"cannot read config: {exc}") from None
    report = run_benchmark(cfg, args.out)
    sys.stdout.write(report.summary())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wtagraph", description="Node classification on weighted graphs")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("build-knn", help="k-NN graph from a feature CSV")
    s.add_argument("--input", required=True)
    s.add_argument("--k", type=int, default=10)
    s.add_argument("--out", required=True)
    s.add_argument("--class-column", type=int, default=None, help="column holding class names (negative counts from the end)")
    s.add_argument("--classes-out", default=None, help="write 'node class' lines here")
    s.set_defaults(func=cmd_build_knn)

    s = sub.add_parser("tree", help="draw a spanning tree")
    s.add_argument("--kind", choices=TREE_CHOICES, default="rst")
    s.add_argument("--graph", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_tree)

    def prediction_args(s):
        s.add_argument("--graph", required=True)
        s.add_argument("--labels", required=True)
        s.add_argument("--tree-kind", choices=TREE_CHOICES, default="rst")
        s.add_argument("--train-frac", type=float, default=0.25)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--out", default=None, help="write per-node predictions as CSV")

    s = sub.add_parser("predict", help="train/test prediction with one algorithm")
    s.add_argument("--algo", choices=["wta", "nwwta", "wmv", "labprop", "gpa"], default="wta")
    prediction_args(s)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("committee", help="majority vote over several spanning trees")
    s.add_argument("--size", type=int, default=7)
    s.add_argument("--algo", choices=["wta", "nwwta", "gpa"], default="wta")
    prediction_args(s)
    s.set_defaults(func=cmd_committee)

    s = sub.add_parser("adversary", help="adversarial labeling with a small expected cutsize")
    s.add_argument("--graph", required=True)
    s.add_argument("--budget", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=None, help="write the labeling here")
    s.set_defaults(func=cmd_adversary)

    s = sub.add_parser("bench", help="run a benchmark grid from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (InputError, GraphError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # anything else is a failure of the computation
        log.debug("runtime failure", exc_info=True)
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
