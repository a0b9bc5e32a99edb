"""Command-line entry point: ``srwalk {synth,train,predict,eval,baselines}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import formats
from .evalkit import BASELINES, baseline_scores, evaluate_scores, pooled_roc, run_experiment
from .graph_model import (
    UntrainableInstance,
    add_common_friends_feature,
    explicit_instance,
    two_hop_instance,
)
from .synthgen import disjoint_union, generate_many
from .trainer import OptimizationError, TrainConfig, predict, train
from .walker import WalkNotConverged, build_transition, normalize_candidates, walk

logger = logging.getLogger("srwalk")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="srwalk", description="Supervised random walks for link prediction.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="generate synthetic graphs and instances")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--graphs", type=int, help="number of graphs (overrides n_graphs)")

    def data_args(p):
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--edges", required=True, help="edge file")
        p.add_argument("--instances", required=True, help="instance file")

    p = sub.add_parser("train", help="learn edge-strength weights")
    data_args(p)
    p.add_argument("--out", required=True, help="output directory for weights.txt and report.csv")
    p.add_argument("--validation", help="instance file used for the AUC trajectory")
    p.add_argument("--dump-walk", help="directory for per-seed p/dp CSV dumps at the final weights")

    p = sub.add_parser("predict", help="rank candidates with learned weights")
    data_args(p)
    p.add_argument("--weights", required=True, help="weights file written by train")
    p.add_argument("--out", required=True, help="ranking TSV path")

    for name, text in (
        ("eval", "train on half the seeds and compare with baselines"),
        ("baselines", "score baselines only"),
    ):
        p = sub.add_parser(name, help=text)
        data_args(p)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--detail", action="store_true", help="also write per-instance metrics")
        p.add_argument("--roc", action="store_true", help="also write ROC points per method")
    return parser


def _require_files(*paths):
    for path in paths:
        if path is not None and not Path(path).is_file():
            raise UsageError(f"srwalk: no such file: {path}")


def _config_values(path) -> dict[str, str]:
    return formats.read_config(path) if path else {}


def load_dataset(graph, rows, values, labelled=True):
    """Instances for each row; rows without an L column use the two-hop candidate rule."""
    min_common = formats.other(values, "min_common", 4)
    add_gamma = formats.other(values, "common_friends_feature", False)
    out = []
    for seed, d, l in rows:
        if not 0 <= seed < graph.node_count:
            raise ValueError(f"seed {seed} is not a node of the graph")
        try:
            if l is None:
                inst = two_hop_instance(graph, seed, (), d, min_common, labelled=labelled)
            else:
                inst = explicit_instance(graph, seed, d, l, labelled=labelled)
        except UntrainableInstance as exc:
            logger.warning("skipping untrainable instance: %s", exc)
            continue
        out.append(add_common_friends_feature(inst) if add_gamma else inst)
    return out


def _load(args, values, labelled=True):
    graph = formats.read_edge_file(args.edges)
    rows = formats.read_instance_file(args.instances)
    return graph, load_dataset(graph, rows, values, labelled)


def cmd_synth(args) -> int:
    values = _config_values(args.config)
    scfg = formats.synth_config(values)
    count = args.graphs or formats.other(values, "n_graphs", 40)
    gens = generate_many(scfg, count)
    union, offsets = disjoint_union([g.graph for g in gens])
    out = formats.ensure_dir(args.out)
    formats.write_edge_file(out / "edges.tsv", union, undirected=True)
    formats.write_instance_file(
        out / "instances.tsv",
        [(g.seed + o, g.destinations + o, g.nolinks + o) for g, o in zip(gens, offsets)],
    )
    with open(out / "manifest.txt", "w", encoding="utf-8", newline="\n") as fh:
        for k, v in scfg.as_dict().items():
            v = ",".join(formats.fmt(x) for x in v) if isinstance(v, tuple) else v
            fh.write(f"{k}={v}\n")
        fh.write(f"n_graphs={count}\n")
    logger.info("wrote %d graphs (%d nodes) to %s", count, union.node_count, out)
    return EXIT_OK


def _dump_walks(directory, model, dataset, cfg: TrainConfig):
    out = formats.ensure_dir(directory)
    for inst in dataset:
        prepared = model.transform.apply_instance(inst) if model.transform else inst
        state = walk(build_transition(prepared, model, cfg.alpha), cfg.eps, cfg.max_power_iters)
        p, dp = state.p, state.dp
        if cfg.normalize:
            p, dp = normalize_candidates(p, dp, inst.candidates)
        header = ["node", "p"] + [f"dp_{k}" for k in range(dp.shape[1])]
        rows = ([int(inst.node_ids[u]), p[u], *dp[u]] for u in range(len(p)))
        formats.write_csv(out / f"walk_{inst.global_seed}.csv", header, rows)


def cmd_train(args) -> int:
    _require_files(args.edges, args.instances, args.validation)
    values = _config_values(args.config)
    cfg = formats.train_config(values)
    graph, dataset = _load(args, values)
    validation = None
    if args.validation:
        validation = load_dataset(graph, formats.read_instance_file(args.validation), values)
    if not dataset:
        raise ValueError("no trainable instances")
    report = train(dataset, cfg, validation=validation)
    out = formats.ensure_dir(args.out)
    formats.write_weights(out / "weights.txt", report.model)
    formats.write_csv(
        out / "report.csv",
        ["iter", "loss", "val_auc"],
        ([i, f, a] for i, (f, a) in enumerate(zip(report.loss_history, report.auc_history))),
    )
    if args.dump_walk:
        _dump_walks(args.dump_walk, report.model, dataset, cfg)
    return EXIT_OK


def cmd_predict(args) -> int:
    _require_files(args.edges, args.instances, args.weights)
    values = _config_values(args.config)
    cfg = formats.train_config(values)
    model = formats.read_weights(args.weights)
    _, dataset = _load(args, values, labelled=False)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("seed\trank\tnode\tscore\n")
        for inst in dataset:
            for rank, (node, score) in enumerate(predict(model, inst, cfg), 1):
                fh.write(f"{inst.global_seed}\t{rank}\t{node}\t{formats.fmt(score)}\n")
    return EXIT_OK


def _write_results(out, result_rows, seeds, detail, roc_curves=None):
    formats.write_csv(
        out / "results.csv",
        ["method", "auc_mean", "prec20_mean", "n_instances"],
        ([r.method, r.auc_mean if not r.failed else "failed", r.prec_mean if not r.failed else "failed", len(r.aucs)]
         for r in result_rows),
    )
    if detail:
        formats.write_csv(
            out / "detail.csv",
            ["method", "seed", "auc", "prec20"],
            ([r.method, s, a, p] for r in result_rows for s, a, p in zip(seeds, r.aucs, r.precs)),
        )
    for method, (fpr, tpr) in (roc_curves or {}).items():
        formats.write_csv(out / f"roc_{method}.csv", ["fpr", "tpr"], zip(fpr, tpr))


def cmd_eval(args) -> int:
    _require_files(args.edges, args.instances)
    values = _config_values(args.config)
    cfg = formats.train_config(values)
    k = formats.other(values, "top_k", 20)
    _, dataset = _load(args, values)
    result = run_experiment(dataset, cfg, k=k)
    out = formats.ensure_dir(args.out)
    _write_results(out, result.rows, result.seeds, args.detail, result.roc if args.roc else None)
    if result.report is not None:
        formats.write_weights(out / "weights.txt", result.report.model)
    return EXIT_RUNTIME if result.row("srw").failed else EXIT_OK


def cmd_baselines(args) -> int:
    _require_files(args.edges, args.instances)
    values = _config_values(args.config)
    cfg = formats.train_config(values)
    k = formats.other(values, "top_k", 20)
    _, dataset = _load(args, values)
    rows, roc = [], {}
    for method in BASELINES:
        scored = [baseline_scores(inst, method, cfg.alpha, cfg.eps) for inst in dataset]
        rows.append(evaluate_scores(method, scored, dataset, k))
        if args.roc:
            roc[method] = pooled_roc(scored, dataset)
    out = formats.ensure_dir(args.out)
    _write_results(out, rows, [inst.global_seed for inst in dataset], args.detail, roc)
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "baselines": cmd_baselines,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("srwalk: a subcommand is required")
        if getattr(args, "config", None):
            _require_files(args.config)
    except UsageError as exc:
        print(parser.format_usage().rstrip(), file=sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(parser.format_usage().rstrip(), file=sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (formats.ParseError, formats.ConfigError) as exc:
        print(f"srwalk: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, WalkNotConverged, OptimizationError, OSError) as exc:
        print(f"srwalk: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
