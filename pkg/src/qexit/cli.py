"""Command line entry point: ``qexit <command> [options]``.

Every command reads and validates all inputs and computes all results
before it writes any file, so a failing run leaves no partial output.
Tabular outputs are TSV with one header line.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .exitlab import (DEFAULT_EPSILON, QueryClass, class_counts, classify_query,
                      exit_histogram, oracle_curve, oracle_exit)
from .ingest import LetorParseError, RankingDataset, dataset_stats, format_letor, read_letor
from .metrics import dataset_trajectories, mean_ndcg
from .model import (ModelParseError, generate_synthetic_ensemble, read_model,
                    write_canonical_model)
from .scorer import CheckpointSet, make_checkpoints
from .sentinel import (SentinelConfig, evaluate_config, format_report_json,
                       format_report_tsv, search_placements)
from .synthetic import generate_synthetic_dataset

logger = logging.getLogger("qexit")


class UsageError(Exception):
    pass


@dataclasses.dataclass
class Run:
    """Loaded inputs shared by the analysis commands."""

    args: argparse.Namespace
    ensemble: object
    test: RankingDataset | None
    valid: RankingDataset | None

    @property
    def num_trees(self) -> int:
        return len(self.ensemble)

    def checkpoints(self) -> CheckpointSet:
        stride = self.args.stride
        if stride > self.num_trees:
            raise UsageError(f"--stride {stride} exceeds the {self.num_trees} trees of the model")
        return make_checkpoints(self.num_trees, stride, self.args.first_tree)

    def trajectories(self, ds: RankingDataset, cps: CheckpointSet):
        trajs = dataset_trajectories(self.ensemble, ds, cps, self.args.k, self.args.threads)
        n_zero = sum(t.zero_idcg for t in trajs)
        if self.args.zero_idcg == "exclude":
            trajs = [t for t in trajs if not t.zero_idcg]
        if not trajs:
            raise UsageError("no queries left to analyse")
        return trajs, n_zero


def _fmt(x) -> str:
    return repr(float(x))


def _tsv(header, rows) -> str:
    lines = ["\t".join(header)]
    lines.extend("\t".join(str(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _load(args, need_test=True, need_valid=False) -> Run:
    if not Path(args.model).is_file():
        raise UsageError(f"model file not found: {args.model}")
    for flag, path, needed in (("--test", args.test, need_test),
                               ("--valid", getattr(args, "valid", None), need_valid)):
        if needed and path is None:
            raise UsageError(f"{flag} is required")
        if path is not None and not Path(path).is_file():
            raise UsageError(f"{flag} file not found: {path}")
    ensemble = read_model(args.model, args.model_format)
    test = read_letor(args.test) if args.test else None
    valid = read_letor(args.valid) if getattr(args, "valid", None) else None
    for name, ds in (("test", test), ("valid", valid)):
        if ds is not None and len(ds) == 0:
            raise UsageError(f"{name} dataset contains no queries")
    return Run(args, ensemble, test, valid)


def _write_outputs(out_dir: str, files: dict[str, str]):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        with open(out / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        logger.info("wrote %s", out / name)


# --------------------------------------------------------------------------
# commands

def cmd_score(args) -> dict[str, str]:
    run = _load(args)
    cps = CheckpointSet((run.num_trees,))
    all_trajs = dataset_trajectories(run.ensemble, run.test, cps, args.k, args.threads)
    rows = []
    for g, t in zip(run.test.groups, all_trajs):
        rows.append((g.query_id, len(g), _fmt(t.full), int(t.zero_idcg)))
    kept = [t.full for t in all_trajs if not (args.zero_idcg == "exclude" and t.zero_idcg)]
    st = dataset_stats(run.test)
    stats = [("num_queries", st.num_queries), ("num_documents", st.num_documents),
             ("num_features", st.num_features)]
    stats += [(f"label_{lab}", cnt) for lab, cnt in st.label_histogram.items()]
    stats += [("model_num_trees", run.num_trees),
              ("model_num_features", run.ensemble.num_features),
              ("k", args.k), ("zero_idcg_policy", args.zero_idcg),
              ("num_zero_idcg", sum(t.zero_idcg for t in all_trajs)),
              ("mean_ndcg", _fmt(mean_ndcg(kept)) if kept else "nan")]
    return {"scores.tsv": _tsv(("query_id", "num_docs", "ndcg", "zero_idcg"), rows),
            "stats.tsv": _tsv(("key", "value"), stats)}


def cmd_oracle(args) -> dict[str, str]:
    run = _load(args)
    trajs, n_zero = run.trajectories(run.test, run.checkpoints())
    exits = [oracle_exit(t) for t in trajs]
    per_query = [(e.query_id, int(classify_query(t, args.epsilon)), e.exit_position,
                  _fmt(e.exit_ndcg), _fmt(e.full_ndcg)) for e, t in zip(exits, trajs)]
    hist = exit_histogram(exits, args.bin_width)
    curve = oracle_curve(trajs)
    summary = [("num_queries", len(trajs)), ("num_zero_idcg", n_zero),
               ("zero_idcg_policy", args.zero_idcg),
               ("mean_full_ndcg", _fmt(mean_ndcg([e.full_ndcg for e in exits]))),
               ("mean_oracle_ndcg", _fmt(mean_ndcg([e.exit_ndcg for e in exits]))),
               ("curve_definition", "capped_oracle_mean(x) = mean NDCG at min(x, oracle exit)")]
    return {
        "oracle_exits.tsv": _tsv(("query_id", "class", "exit_position", "exit_ndcg",
                                  "full_ndcg"), per_query),
        "exit_histogram.tsv": _tsv(("bin_start", "count"), hist.items()),
        "oracle_curve.tsv": _tsv(("position", "full_mean_ndcg", "capped_oracle_mean_ndcg",
                                  "exit_count"),
                                 [(p.position, _fmt(p.full_mean), _fmt(p.capped_oracle_mean),
                                   p.exit_count) for p in curve]),
        "oracle_summary.tsv": _tsv(("key", "value"), summary),
    }


def cmd_classify(args) -> dict[str, str]:
    run = _load(args)
    trajs, n_zero = run.trajectories(run.test, run.checkpoints())
    classes = [classify_query(t, args.epsilon) for t in trajs]
    rows = [(t.query_id, int(c), c.category, _fmt(t.values[0]), _fmt(t.values[-1]),
             _fmt(t.values.max()), _fmt(t.values.min())) for t, c in zip(trajs, classes)]
    counts = class_counts(classes)
    count_rows = [(int(c), c.category, n) for c, n in counts.items()]
    count_rows.append(("total", "", len(trajs)))
    return {"classes.tsv": _tsv(("query_id", "class", "category", "first", "last", "max",
                                 "min"), rows),
            "class_counts.tsv": _tsv(("class", "category", "count"), count_rows)}


def cmd_place(args) -> dict[str, str]:
    same_split = args.valid is None
    if same_split:
        logger.warning("no --valid given: placing sentinels on the test split "
                       "(same-split, exploratory only)")
        args.valid = args.test
    run = _load(args, need_test=True, need_valid=True)
    cps = run.checkpoints()
    trajs, n_zero = run.trajectories(run.valid, cps)
    result = search_placements(args.num_sentinels, cps.positions[:-1], trajs, run.num_trees,
                               threads=args.threads)
    ranked = [(i, str(cfg), _fmt(obj)) for i, (cfg, obj) in enumerate(result.ranking, start=1)]
    winner = {"sentinels": list(result.best.sentinels), "objective": result.objective,
              "num_trees": run.num_trees, "num_candidates": len(cps) - 1,
              "num_configs": len(result.ranking),
              "placement_split": "test (same-split, exploratory)" if same_split else "valid",
              "num_zero_idcg": n_zero}
    files = {"placements.tsv": _tsv(("rank", "sentinels", "objective"), ranked),
             "best_sentinels.json": json.dumps(winner, indent=2) + "\n"}
    if not same_split:
        test_trajs, _ = run.trajectories(run.test, cps)
        report = evaluate_config(result.best, test_trajs, run.num_trees)
        files["report.tsv"] = format_report_tsv(report)
        files["report.json"] = format_report_json(report)
    return files


def cmd_evaluate(args) -> dict[str, str]:
    if not args.sentinels:
        raise UsageError("--sentinels is required (e.g. --sentinels 25,300)")
    config = SentinelConfig.parse(args.sentinels)
    run = _load(args)
    config.exits(run.num_trees)
    cps = CheckpointSet.of(config.sentinels, run.num_trees)
    trajs, n_zero = run.trajectories(run.test, cps)
    doc_counts = {g.query_id: len(g) for g in run.test.groups}
    report = evaluate_config(config, trajs, run.num_trees, weighting=args.weighting,
                             doc_counts=doc_counts)
    report = dataclasses.replace(report, num_zero_idcg=n_zero)
    exits = [(t.query_id, report.per_query_exits[t.query_id], _fmt(t.at(
        report.per_query_exits[t.query_id])), _fmt(t.full)) for t in trajs]
    return {"report.tsv": format_report_tsv(report),
            "report.json": format_report_json(report),
            "exits.tsv": _tsv(("query_id", "exit_position", "exit_ndcg", "full_ndcg"), exits)}


def cmd_gen(args) -> dict[str, str]:
    e = generate_synthetic_ensemble(args.num_trees, args.depth, args.num_features, args.seed)
    files = {"model.json": write_canonical_model(e)}
    peaks, scores = [], []
    for split, offset in (("test", 1), ("valid", 2)):
        data = generate_synthetic_dataset(e, args.num_queries, args.seed + offset,
                                          prefix=f"{split[0]}")
        files[f"{split}.txt"] = format_letor(data.dataset)
        for g in data.dataset.groups:
            peaks.append((split, g.query_id, data.peaks[g.query_id]))
            scores.extend((split, g.query_id, i, _fmt(s))
                          for i, s in enumerate(data.expected_scores[g.query_id]))
    files["peaks.tsv"] = _tsv(("split", "query_id", "peak_tree"), peaks)
    files["expected_scores.tsv"] = _tsv(("split", "query_id", "ordinal", "score"), scores)
    return files


COMMANDS = {
    "score": cmd_score,
    "oracle": cmd_oracle,
    "classify": cmd_classify,
    "place-sentinels": cmd_place,
    "evaluate": cmd_evaluate,
    "gen-synthetic": cmd_gen,
}


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qexit", description="Query-level early-exit analysis for tree ensembles.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def analysis(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--model", required=True, help="model file")
        p.add_argument("--model-format", choices=("text", "canonical"), default="canonical",
                       help="LightGBM text dump or canonical JSON (default)")
        p.add_argument("--test", help="LETOR/SVMLight file to analyse")
        p.add_argument("--k", type=_positive, default=10, help="NDCG cutoff")
        p.add_argument("--zero-idcg", choices=("zero", "exclude"), default="zero",
                       help="score queries without relevant documents as 0 or drop them")
        p.add_argument("--threads", type=_positive, default=os.cpu_count() or 1,
                       help="worker threads; results do not depend on it")
        p.add_argument("--out-dir", required=True, help="directory for output files")
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    def grid(p):
        p.add_argument("--stride", type=_positive, default=25,
                       help="checkpoint every N trees (the last tree is always one)")
        p.add_argument("--first-tree", action="store_true",
                       help="also use tree 1 as a checkpoint")

    analysis("score", "full-model NDCG per query")
    p = analysis("oracle", "oracle exits, exit histogram and curve data")
    grid(p)
    p.add_argument("--epsilon", type=_positive_float, default=DEFAULT_EPSILON,
                   help="flatness tolerance for the taxonomy")
    p.add_argument("--bin-width", type=_positive, default=1,
                   help="exit histogram bin width in trees")
    p = analysis("classify", "six-class trajectory taxonomy")
    grid(p)
    p.add_argument("--epsilon", type=_positive_float, default=DEFAULT_EPSILON,
                   help="flatness tolerance for the taxonomy")
    p = analysis("place-sentinels", "exhaustive sentinel placement on the validation split")
    grid(p)
    p.add_argument("--valid", help="split to place on (default: the --test split)")
    p.add_argument("--num-sentinels", type=_positive, default=2,
                   help="how many sentinels to place")
    p = analysis("evaluate", "evaluate explicit sentinel positions on the test split")
    p.add_argument("--sentinels", help="comma-separated tree positions, e.g. 25,300")
    p.add_argument("--weighting", choices=("queries", "documents"), default="queries",
                   help="how the overall speedup weights queries")

    p = sub.add_parser("gen-synthetic", help="write a synthetic model and LETOR splits")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--num-trees", type=_positive, default=200)
    p.add_argument("--depth", type=_positive, default=4)
    p.add_argument("--num-features", type=_positive, default=20)
    p.add_argument("--num-queries", type=_positive, default=100)
    p.add_argument("--out-dir", required=True)
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        files = COMMANDS[args.command](args)
    except (UsageError, ModelParseError, LetorParseError, ValueError, OSError) as exc:
        print(f"qexit {args.command}: error: {exc}", file=sys.stderr)
        return 2
    _write_outputs(args.out_dir, files)
    return 0


if __name__ == "__main__":
    sys.exit(main())
