"""Mine crash simulation decks: store parts, group variants, rank and explain results.

Exit codes: 0 success, 1 usage or configuration error, 2 data error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from .errors import ConfigError, CrashMineError
from .mining.arff import read_arff, write_arff
from .mining.chi2 import chi_squared_rank
from .mining.kmeans import kmeans_classes
from .mining.table import assemble_table, read_results_csv
from .mining.tree import build_tree
from .partstore import PartStore, dedup_stats, modified_parts
from .pipeline import PipelineConfig, ingest_deck, load_config, run_pipeline
from .variants import LINKAGES, SimilarityWeights, load_weights, two_level_grouping


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if args.store:
        cfg.store = Path(args.store)
    if args.seed is not None:
        cfg.seed = args.seed
    for name in ("angle_threshold", "linkage", "coarse_cut", "fine_cut", "k", "chi2_bins",
                 "tree_confidence", "tree_min_instances"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "results", None):
        cfg.results = Path(args.results)
    if getattr(args, "weights", None):
        cfg.weights = Path(args.weights)
    if getattr(args, "columns", None):
        cfg.result_columns = [c.strip() for c in args.columns.split(",") if c.strip()]
    if getattr(args, "out", None) and args.command in ("run", "report"):
        cfg.output = Path(args.out)
    return cfg


def _grouping(cfg, store, sims=None):
    entries = store.entries(sims)
    if not entries:
        raise ConfigError(f"store {store.root} holds no parts")
    return entries, two_level_grouping(entries, cfg.coarse_cut, cfg.fine_cut, cfg.linkage)


def cmd_ingest(args, cfg):
    store = PartStore(cfg.store)
    pairs = []
    for item in args.decks:
        sim, sep, path = item.partition("=")
        pairs.append((sim, Path(path)) if sep else (Path(item).stem, Path(item)))
    if not pairs:
        pairs = cfg.decks
    if not pairs:
        raise ConfigError("no decks given")
    for sim, path in pairs:
        entries = ingest_deck(store, sim, path, cfg.angle_threshold, previews=not args.no_previews)
        print(f"{sim}: {len(entries)} parts from {path}")
    return 0


def cmd_stats(args, cfg):
    store = PartStore(cfg.store)
    entries = store.entries()
    out = asdict(dedup_stats(entries))
    out["mesh_files"] = store.mesh_file_count()
    out["modified_part_numbers"] = sorted(modified_parts(entries))
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_cluster(args, cfg):
    store = PartStore(cfg.store)
    entries, grouping = _grouping(cfg, store)
    lines = ["simulation_id\tpart_id\tdigest\tpart_cluster\tvariant"]
    for e in entries:
        lines.append(f"{e.simulation_id}\t{e.part_id}\t{e.digest}\t"
                     f"{grouping.part_cluster[e.key]}\t{grouping.variant[e.key]}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_table(args, cfg):
    if cfg.results is None:
        raise ConfigError("--results is required")
    store = PartStore(cfg.store)
    results = read_results_csv(cfg.results)
    entries, grouping = _grouping(cfg, store, [r.simulation_id for r in results])
    weights = load_weights(cfg.weights) if cfg.weights else SimilarityWeights.uniform()
    table = assemble_table(entries, grouping, results, weights, cfg.name)
    if not args.no_classes:
        table, _ = kmeans_classes(table, cfg.result_columns, cfg.k, cfg.seed)
    _emit(write_arff(table), args.out)
    return 0


def _read_table(path):
    return read_arff(Path(path).read_text(encoding="utf-8"))


def cmd_rank(args, cfg):
    ranking = chi_squared_rank(_read_table(args.table), "class", cfg.chi2_bins)
    _emit(ranking.to_text(), args.out)
    return 0


def cmd_tree(args, cfg):
    tree = build_tree(_read_table(args.table), "class", cfg.tree_confidence,
                      cfg.tree_min_instances)
    _emit(tree.to_text(), args.out)
    if args.dot:
        Path(args.dot).write_text(tree.to_dot(), encoding="utf-8")
    return 0


def _run(args, cfg, ingest):
    result = run_pipeline(cfg, dry_run=args.dry_run, ingest=ingest)
    if args.dry_run:
        for i, stage in enumerate(result, start=1):
            print(f"{i:2d}. {stage}")
        return 0
    print(f"report: {result.report}")
    print(f"bundle digest: {result.digest}")
    return 0


def cmd_report(args, cfg):
    return _run(args, cfg, ingest=False)


def cmd_run(args, cfg):
    return _run(args, cfg, ingest=True)


def _emit(text, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def build_parser():
    p = _Parser(prog="crashmine", description=__doc__.splitlines()[0])
    p.add_argument("--store", help="part store root directory")
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--seed", type=int, help="k-means seed (default 42)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def clustering(sp):
        sp.add_argument("--linkage", choices=LINKAGES)
        sp.add_argument("--coarse-cut", dest="coarse_cut", type=float)
        sp.add_argument("--fine-cut", dest="fine_cut", type=float)

    sp = sub.add_parser("ingest", help="parse decks and store their parts")
    sp.add_argument("decks", nargs="*", metavar="[SIM=]DECK")
    sp.add_argument("--angle-threshold", dest="angle_threshold", type=float)
    sp.add_argument("--no-previews", action="store_true")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("stats", help="deduplication statistics of the store")
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("cluster", help="part clusters and variants per catalog entry")
    clustering(sp)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_cluster)

    sp = sub.add_parser("table", help="assemble the mining table (with k-means classes)")
    clustering(sp)
    sp.add_argument("--results")
    sp.add_argument("--weights")
    sp.add_argument("--columns", help="comma-separated result columns for the classes")
    sp.add_argument("--k", type=int)
    sp.add_argument("--no-classes", action="store_true")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_table)

    sp = sub.add_parser("rank", help="chi-squared attribute ranking of a table")
    sp.add_argument("table")
    sp.add_argument("--bins", dest="chi2_bins", type=int)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_rank)

    sp = sub.add_parser("tree", help="decision tree on a table")
    sp.add_argument("table")
    sp.add_argument("-C", dest="tree_confidence", type=float)
    sp.add_argument("-M", dest="tree_min_instances", type=int)
    sp.add_argument("--dot")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_tree)

    for name, func, text in (("report", cmd_report, "mine the stored parts and write a report"),
                             ("run", cmd_run, "full pipeline from decks to report")):
        sp = sub.add_parser(name, help=text)
        clustering(sp)
        sp.add_argument("--results")
        sp.add_argument("--weights")
        sp.add_argument("--columns")
        sp.add_argument("--k", type=int)
        sp.add_argument("--out")
        sp.add_argument("--dry-run", action="store_true")
        sp.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        return args.func(args, cfg)
    except CrashMineError as exc:
        print(f"crashmine: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"crashmine: I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
