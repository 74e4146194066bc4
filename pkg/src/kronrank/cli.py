"""Command-line front end: gen-rps, train, predict, rank, evaluate, bench.

Every command is deterministic given its flags, seed and input files. On
failure a single line ``<category>: <message>`` is printed to stderr and
the exit status is nonzero; the category token matches the exception
hierarchy in ``kronrank.errors``.
"""

import argparse
import os
import sys
import time

import numpy as np

from . import datasets
from .errors import InvalidInputError, KronRankError
from .graph import GraphDataset
from .kernels import NodeKernelConfig, PairwiseKind, node_kernel_matrix
from .losses import pairwise_rank_loss, regression_loss
from .model import fit_model, load_model, predict_scores, rank_candidates, save_model
from .solvers import (
    DEFAULT_LAMBDA,
    DEFAULT_MAX_ITER,
    DEFAULT_RESIDUAL_TOL,
    Objective,
    SolverKind,
    TrainConfig,
    train_dual,
)


def _cmd_gen_rps(args) -> int:
    cfg = datasets.RpsConfig(
        n_train_players=args.players,
        n_train_games=args.games,
        n_test_players=args.test_players,
        w=args.w,
        seed=args.seed,
    )
    data = datasets.gen_rps(cfg)
    os.makedirs(args.out_dir, exist_ok=True)

    def path(name):
        return os.path.join(args.out_dir, name)

    train = data.train
    datasets.write_nodes_csv(path("train_nodes.csv"), train.node_ids, train.features)
    datasets.write_edges_csv(
        path("train_edges.csv"), train.node_ids, train.starts, train.ends, train.labels
    )
    datasets.write_nodes_csv(path("test_nodes.csv"), data.test_ids, data.test_features)
    # ground-truth win probabilities for all ordered pairs of distinct test players
    m = len(data.test_ids)
    pairs = [(i, j) for i in range(m) for j in range(m) if i != j]
    datasets.write_edges_csv(
        path("test_truth.csv"),
        data.test_ids,
        [i for i, _ in pairs],
        [j for _, j in pairs],
        [data.test_win_prob[i, j] for i, j in pairs],
    )
    print(f"wrote rock-paper-scissors data to {args.out_dir}")
    return 0


def _kernel_config(args) -> NodeKernelConfig:
    if args.kernel == "gaussian":
        return NodeKernelConfig("gaussian", gamma=args.gamma)
    if args.gamma is not None:
        raise InvalidInputError("--gamma is only valid with --kernel gaussian")
    return NodeKernelConfig("linear")


def _cmd_train(args) -> int:
    ids, features = datasets.read_nodes_csv(args.nodes)
    starts, ends, labels = datasets.read_edges_csv(args.edges, ids)
    ds = GraphDataset(ids, features, starts, ends, labels)
    cfg = TrainConfig(
        objective=Objective(args.objective),
        pairwise=PairwiseKind(args.pairwise),
        lam=args.lam,
        solver=SolverKind(args.solver),
        max_iter=args.max_iter,
        residual_tol=args.tol,
    )
    model = fit_model(ds, _kernel_config(args), cfg)
    save_model(model, args.out_model)
    print(f"trained on {ds.num_nodes} nodes / {ds.num_edges} edges; wrote {args.out_model}")
    return 0


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    start_ids, start_feats = datasets.read_nodes_csv(args.start_nodes)
    end_path = args.end_nodes if args.end_nodes is not None else args.start_nodes
    end_ids, end_feats = datasets.read_nodes_csv(end_path)
    scores = predict_scores(model, start_feats, end_feats)
    datasets.write_predictions_csv(args.out, start_ids, end_ids, scores)
    print(f"wrote {len(start_ids) * len(end_ids)} scores to {args.out}")
    return 0


def _cmd_rank(args) -> int:
    model = load_model(args.model)
    ids, features = datasets.read_nodes_csv(args.nodes)
    if args.condition not in ids:
        raise InvalidInputError(f"condition id {args.condition!r} not in {args.nodes}")
    cond_idx = ids.index(args.condition)
    cand_idx = [i for i in range(len(ids)) if i != cond_idx]
    if not cand_idx:
        raise InvalidInputError("no candidates besides the condition node")
    ranking = rank_candidates(
        model, features[cond_idx], features[cand_idx], direction=args.direction
    )
    for rank, (local_idx, score) in enumerate(ranking, start=1):
        print(f"{rank} {ids[cand_idx[local_idx]]} {score:.17g}")
    return 0


def _cmd_evaluate(args) -> int:
    truth_rows = datasets.read_truth_csv(args.truth)
    if not truth_rows:
        raise InvalidInputError(f"{args.truth}: no ground-truth pairs")
    pred_map = {(s, e): v for s, e, v in datasets.read_predictions_csv(args.predictions)}
    scores, labels, keys = [], [], []
    for start, end, label in truth_rows:
        if (start, end) not in pred_map:
            raise InvalidInputError(f"no prediction for pair ({start} -> {end})")
        scores.append(pred_map[(start, end)])
        labels.append(label)
        keys.append(start if args.direction == "outgoing" else end)
    groups = {}
    for key, score, label in zip(keys, scores, labels):
        groups.setdefault(key, ([], []))
        groups[key][0].append(score)
        groups[key][1].append(label)
    grouped = [
        (np.asarray(h), np.asarray(y)) for h, y in (groups[k] for k in sorted(groups))
    ]
    print(f"rank_loss {pairwise_rank_loss(grouped):.17g}")
    print(f"regression_loss {regression_loss(np.asarray(scores), np.asarray(labels)):.17g}")
    return 0


def _cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",") if s]
    if not sizes or any(p < 2 for p in sizes):
        raise InvalidInputError("--sizes needs comma-separated node counts >= 2")
    lines = ["p,q,seconds"]
    for p in sizes:
        ds = datasets.synthetic_complete(p, d=5, seed=args.seed)
        k = node_kernel_matrix(ds.features, ds.features, NodeKernelConfig("linear"))
        cfg = TrainConfig(
            objective=Objective.REGRESSION,
            lam=1.0,
            solver=SolverKind(args.solver),
            max_iter=args.max_iter,
            residual_tol=0.0,
        )
        best = None
        for _ in range(args.repeats):
            tic = time.perf_counter()
            train_dual(k, ds, cfg)
            elapsed = time.perf_counter() - tic
            best = elapsed if best is None else min(best, elapsed)
        lines.append(f"{p},{p * p},{best:.6f}")
    text = "\n".join(lines) + "\n"
    if args.out is not None:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kronrank",
        description="Conditional ranking on relational data with Kronecker pairwise kernels",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-rps", help="generate a rock-paper-scissors benchmark")
    g.add_argument("--players", type=int, default=100)
    g.add_argument("--games", type=int, default=1000)
    g.add_argument("--test-players", type=int, default=100)
    g.add_argument("--w", type=float, default=1.0, help="strategy imbalance >= 1")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-dir", required=True)
    g.set_defaults(func=_cmd_gen_rps)

    t = sub.add_parser("train", help="train a model from nodes and edges CSVs")
    t.add_argument("--nodes", required=True)
    t.add_argument("--edges", required=True)
    t.add_argument("--objective", choices=["regression", "ranking"], default="regression")
    t.add_argument(
        "--pairwise", choices=["ordinary", "symmetric", "reciprocal"], default="ordinary"
    )
    t.add_argument("--kernel", choices=["linear", "gaussian"], default="linear")
    t.add_argument("--gamma", type=float, default=None)
    t.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    t.add_argument("--solver", choices=["closed", "iterative"], default="closed")
    t.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    t.add_argument("--tol", type=float, default=DEFAULT_RESIDUAL_TOL)
    t.add_argument("--out-model", required=True)
    t.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="score a start set against an end set")
    p.add_argument("--model", required=True)
    p.add_argument("--start-nodes", required=True)
    p.add_argument("--end-nodes", default=None, help="defaults to --start-nodes")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)

    r = sub.add_parser("rank", help="rank candidates for one conditioning node")
    r.add_argument("--model", required=True)
    r.add_argument("--nodes", required=True)
    r.add_argument("--condition", required=True, help="node id of the conditioning row")
    r.add_argument("--direction", choices=["outgoing", "incoming"], default="outgoing")
    r.set_defaults(func=_cmd_rank)

    e = sub.add_parser("evaluate", help="rank and regression loss of predictions")
    e.add_argument("--predictions", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--direction", choices=["outgoing", "incoming"], default="outgoing")
    e.set_defaults(func=_cmd_evaluate)

    b = sub.add_parser("bench", help="time training on complete synthetic graphs")
    b.add_argument("--sizes", required=True, help="comma-separated node counts")
    b.add_argument("--solver", choices=["closed", "iterative"], default="closed")
    b.add_argument("--repeats", type=int, default=1)
    b.add_argument("--max-iter", type=int, default=50, help="iterative solver cap")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", default=None, help="write the CSV here instead of stdout")
    b.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KronRankError as exc:
        print(f"{exc.category}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
