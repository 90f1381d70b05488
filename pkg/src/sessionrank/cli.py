"""Command-line orchestration of the ranking pipelines.

Commands: filter, stats, features, train, rerank, eval, asq. Option
precedence is flags > config file (`key = value` lines) > built-in
defaults. Exit codes: 0 success, 1 usage error, 2 data error, 3 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import data as dm
from . import evaluation as ev
from . import features as ft
from . import filtering as fl
from . import ltr
from . import scoring as sc
from .errors import SessionRankError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's 2
        raise _UsageError(message)


def _coerce_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _opt(parser, flag, *, coerce=str, default=None, flag_action=False, help=""):
    """Register an option whose value resolves flags > config > default."""
    dest = flag.lstrip("-").replace("-", "_")
    parser._registry[dest] = (_coerce_bool if flag_action else coerce, default)
    if flag_action:
        parser.add_argument(flag, dest=dest, action="store_true", default=None, help=help)
    else:
        parser.add_argument(flag, dest=dest, type=coerce, default=None, help=help)


def _load_config(path: str) -> dict[str, str]:
    config = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SessionRankError(f"config line {line_no}: expected 'key = value'")
        key, value = line.split("=", 1)
        config[key.strip().replace("-", "_")] = value.strip()
    return config


def _resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Apply flags > config file > defaults."""
    config = _load_config(args.config) if getattr(args, "config", None) else {}
    for dest, (coerce, default) in args._registry.items():
        if getattr(args, dest, None) is not None:
            continue
        if dest in config:
            setattr(args, dest, coerce(config[dest]))
        else:
            setattr(args, dest, default)
    return args


def _scorer_params(args) -> tuple[sc.Bm25Params, sc.F1ExpParams]:
    return (
        sc.Bm25Params(k1=args.k1, b=args.b),
        sc.F1ExpParams(s=args.f1exp_s, k=args.f1exp_k),
    )


def _ltr_params(args) -> ltr.LtrParams:
    return ltr.LtrParams(
        n_trees=args.trees,
        n_leaves=args.leaves,
        shrinkage=args.shrinkage,
        min_leaf_support=args.min_leaf_support,
        n_threshold_candidates=args.threshold_candidates,
        train_metric_k=args.train_k,
        sigma=args.sigma,
        early_stop_rounds=args.early_stop,
        seed=args.seed,
    )


def _load_filtered_corpus(args) -> tuple[dm.Corpus, fl.FilterReport | None]:
    corpus = dm.load_corpus(args.corpus)
    if args.rules is None:
        return corpus, None
    rules = fl.load_rules(args.rules) if args.rules != "default" else fl.FilterRules()
    kept, report = fl.filter_corpus(corpus, rules)
    return kept, report


def _add_common(parser):
    _opt(parser, "--config", help="config file with 'key = value' lines")
    _opt(parser, "--threads", coerce=int, default=1,
         help="parallelism cap (current implementation is single-threaded)")
    _opt(parser, "--seed", coerce=int, default=42, help="seed for all randomized steps")


def _add_scorer_opts(parser):
    _opt(parser, "--k1", coerce=float, default=2.0, help="BM25 k1")
    _opt(parser, "--b", coerce=float, default=0.5, help="BM25 b")
    _opt(parser, "--f1exp-s", coerce=float, default=0.5, help="F1EXP length normalization s")
    _opt(parser, "--f1exp-k", coerce=float, default=0.35, help="F1EXP idf exponent k")
    _opt(parser, "--stats-scope", default="full",
         help="corpus statistics scope: full | per-query")


def _add_pipeline_opts(parser):
    _opt(parser, "--pipeline", default="atm", help="feature pipeline: atm | pmtm")
    _opt(parser, "--adhoc-scores", help="external-score TSV from the ad-hoc reranker")
    _opt(parser, "--session-scores", help="external-score TSV from the session reranker")
    _opt(parser, "--allow-missing-scores", flag_action=True,
         help="allow pmtm without external score files (features default to 0)")
    _opt(parser, "--drop-docid-feature", flag_action=True,
         help="zero out the numeric doc-id feature (pmtm ablation)")


def _subparser(sub, name, func, help):
    p = sub.add_parser(name, help=help)
    p._registry = {}
    p.set_defaults(func=func, _registry=p._registry)
    _add_common(p)
    return p


def build_parser() -> _Parser:
    parser = _Parser(prog="sessionrank",
                     description="Session-search learning-to-rank pipelines")
    sub = parser.add_subparsers(dest="command", required=True)

    p = _subparser(sub, "filter", cmd_filter, "remove meaningless documents")
    _opt(p, "--corpus", help="corpus dir or TSV")
    _opt(p, "--rules", help="rules file ('default' for built-in rules)", default="default")
    _opt(p, "--out-corpus", help="output TSV of kept documents")
    _opt(p, "--report", help="output removal report")

    p = _subparser(sub, "stats", cmd_stats, "corpus statistics")
    _opt(p, "--corpus", help="corpus dir or TSV")
    _opt(p, "--rules", help="optional rules file to filter first")
    _opt(p, "--out", help="output TSV (default stdout)")

    p = _subparser(sub, "features", cmd_features,
                   "extract feature vectors from session logs")
    _add_scorer_opts(p)
    _add_pipeline_opts(p)
    _opt(p, "--sessions", help="session log file")
    _opt(p, "--corpus", help="corpus dir or TSV")
    _opt(p, "--rules", help="rules file ('default' for built-in rules)")
    _opt(p, "--out", help="output RankLib feature file")

    p = _subparser(sub, "train", cmd_train, "train a LambdaMART model")
    _opt(p, "--train", help="training feature file")
    _opt(p, "--valid", help="validation feature file (enables early stopping)")
    _opt(p, "--out", help="output model file")
    _opt(p, "--log", help="optional JSON-lines training log")
    _opt(p, "--trees", coerce=int, default=1000)
    _opt(p, "--leaves", coerce=int, default=10)
    _opt(p, "--shrinkage", coerce=float, default=0.1)
    _opt(p, "--min-leaf-support", coerce=int, default=1)
    _opt(p, "--threshold-candidates", coerce=int, default=256)
    _opt(p, "--train-k", coerce=int, default=10, help="NDCG cutoff of the training metric")
    _opt(p, "--sigma", coerce=float, default=1.0)
    _opt(p, "--early-stop", coerce=int, default=100)

    p = _subparser(sub, "rerank", cmd_rerank,
                   "rerank session candidates into a TREC run")
    _add_scorer_opts(p)
    _add_pipeline_opts(p)
    _opt(p, "--sessions", help="session log file")
    _opt(p, "--corpus", help="corpus dir or TSV")
    _opt(p, "--rules", help="rules file ('default' for built-in rules)")
    _opt(p, "--model", help="trained model file")
    _opt(p, "--baseline", help="rank by a raw scorer instead: bm25 | tfidf | f1exp")
    _opt(p, "--run-tag", default="sessionrank")
    _opt(p, "--out", help="output TREC run file")

    p = _subparser(sub, "eval", cmd_eval, "evaluate a run file against qrels")
    _opt(p, "--run", help="TREC run file")
    _opt(p, "--qrels", help="qrels file")
    _opt(p, "--k", coerce=int, default=10, help="NDCG cutoff")
    _opt(p, "--per-group", help="optional per-group output file")

    p = _subparser(sub, "asq", cmd_asq, "emit assembled session queries per turn")
    _opt(p, "--sessions", help="session log file")
    _opt(p, "--corpus", help="corpus dir or TSV (for reference validation)")
    _opt(p, "--out", help="output TSV 'session:turn<TAB>ASQ'")
    _opt(p, "--max-queries", coerce=int, default=5)
    _opt(p, "--max-titles", coerce=int, default=5)

    return parser


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) is None:
            raise _UsageError(f"missing required option --{name.replace('_', '-')}")


def _read_sessions(path: str) -> list[dm.Session]:
    return dm.parse_session_log(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_filter(args) -> int:
    _require(args, "corpus", "out_corpus")
    kept, report = _load_filtered_corpus(args)
    with open(args.out_corpus, "w", encoding="utf-8") as fh:
        dm.write_corpus_tsv(kept, fh)
    if report is not None and args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fl.write_report(report, fh)
    if report is not None:
        print(f"kept {report.kept} removed {report.removed}")
    return EXIT_OK


def cmd_stats(args) -> int:
    _require(args, "corpus")
    corpus, _ = _load_filtered_corpus(args)
    stats = sc.build_stats(corpus)
    sink = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        sink.write(f"#corpus-stats n_docs={stats.n_docs} built_over={stats.built_over} "
                   f"avgdl={stats.avgdl!r}\n")
        for term in sorted(stats.df):
            sink.write(f"{term}\t{stats.df[term]}\n")
    finally:
        if args.out:
            sink.close()
    return EXIT_OK


def _external_scores(args) -> tuple[ft.ExternalScores, ft.ExternalScores]:
    if args.pipeline != "pmtm":
        return ft.ExternalScores(), ft.ExternalScores()
    if not (args.adhoc_scores and args.session_scores) and not args.allow_missing_scores:
        raise _UsageError(
            "--pipeline pmtm needs --adhoc-scores and --session-scores "
            "(or --allow-missing-scores)"
        )

    def load(path):
        if not path:
            return ft.ExternalScores()
        with open(path, encoding="utf-8") as fh:
            return ft.read_external_scores(fh)

    return load(args.adhoc_scores), load(args.session_scores)


def _extract_groups(args, for_training: bool):
    """Shared featurization path of `features` and `rerank`."""
    sessions = _read_sessions(args.sessions)
    corpus, _ = _load_filtered_corpus(args)
    if len(corpus) == 0:
        raise SessionRankError("no documents survive filtering")
    bm25_params, f1_params = _scorer_params(args)
    adhoc, sess_scores = _external_scores(args)
    full_stats = sc.build_stats(corpus) if args.stats_scope == "full" else None
    if args.stats_scope not in ("full", "per-query"):
        raise _UsageError(f"bad --stats-scope {args.stats_scope!r}")

    ex = ft.ExtractionStats()
    groups: dict[str, list[ft.FeatureVector]] = {}
    for group_key, turn, docs in ft.session_candidates(sessions, corpus, ex):
        stats = full_stats if full_stats is not None else sc.build_stats(dm.Corpus(docs))
        labels = ft.click_labels(turn) if for_training else None
        if args.pipeline == "atm":
            vectors = ft.extract_atm(turn.query, docs, stats, bm25_params, f1_params,
                                     group_key=group_key, labels=labels)
        elif args.pipeline == "pmtm":
            vectors = ft.extract_pmtm(turn.query, docs, stats, adhoc, sess_scores,
                                      bm25_params, f1_params, group_key=group_key,
                                      labels=labels, drop_docid=bool(args.drop_docid_feature))
        else:
            raise _UsageError(f"bad --pipeline {args.pipeline!r}")
        groups[group_key] = vectors
    if ex.missing_docs or ex.skipped_turns:
        print(f"warning: {ex.missing_docs} impressions without corpus documents, "
              f"{ex.skipped_turns} turns skipped", file=sys.stderr)
    missing_ext = adhoc.misses + sess_scores.misses
    if missing_ext:
        print(f"warning: {missing_ext} missing external scores defaulted to 0.0",
              file=sys.stderr)
    return groups


def cmd_features(args) -> int:
    _require(args, "sessions", "corpus", "out")
    groups = _extract_groups(args, for_training=True)
    with open(args.out, "w", encoding="utf-8") as fh:
        ft.write_ranklib((vec for vectors in groups.values() for vec in vectors), fh)
    print(f"wrote {sum(len(v) for v in groups.values())} vectors "
          f"in {len(groups)} groups to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    _require(args, "train", "out")
    with open(args.train, encoding="utf-8") as fh:
        train_groups = ft.group_vectors(ft.read_ranklib(fh))
    valid_groups = None
    if args.valid:
        with open(args.valid, encoding="utf-8") as fh:
            valid_groups = ft.group_vectors(ft.read_ranklib(fh))
    log = ltr.TrainingLog()
    model = ltr.train(train_groups, valid_groups, _ltr_params(args), log=log)
    with open(args.out, "w", encoding="utf-8") as fh:
        ltr.save_model(model, fh)
    if args.log:
        import json
        with open(args.log, "w", encoding="utf-8") as fh:
            for entry in log.rounds:
                fh.write(json.dumps(entry) + "\n")
    print(f"trained {len(model.trees)} trees on {len(train_groups)} groups -> {args.out}")
    return EXIT_OK


def cmd_rerank(args) -> int:
    _require(args, "sessions", "corpus", "out")
    if bool(args.model) == bool(args.baseline):
        raise _UsageError("rerank needs exactly one of --model or --baseline")
    groups = _extract_groups(args, for_training=False)

    if args.model:
        with open(args.model, encoding="utf-8") as fh:
            model = ltr.load_model(fh)
        score_fn = model.predict
    else:
        index = {"atm": {"bm25": 0, "tfidf": 2, "f1exp": 4},
                 "pmtm": {"bm25": 5, "tfidf": 6, "f1exp": 7}}
        try:
            feature_idx = index[args.pipeline][args.baseline]
        except KeyError:
            raise _UsageError(f"bad --baseline {args.baseline!r}") from None
        score_fn = lambda vec: vec.values[feature_idx]  # noqa: E731

    entries = ev.rerank(score_fn, groups, run_tag=args.run_tag)
    with open(args.out, "w", encoding="utf-8") as fh:
        ev.write_run(entries, fh)
    print(f"wrote {len(entries)} run entries to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    _require(args, "run", "qrels")
    with open(args.run, encoding="utf-8") as fh:
        run = ev.read_run(fh)
    with open(args.qrels, encoding="utf-8") as fh:
        qrels = ev.read_qrels(fh)
    result = ev.evaluate_run(run, qrels, args.k)
    if args.per_group:
        with open(args.per_group, "w", encoding="utf-8") as fh:
            for group_key in sorted(result.per_group):
                fh.write(f"{group_key}\t{result.per_group[group_key]:.6f}\n")
    for group_key in sorted(result.per_group):
        print(f"ndcg@{args.k} {group_key} {result.per_group[group_key]:.6f}")
    if result.zero_ideal_groups:
        print(f"zero-ideal groups (excluded from mean): "
              f"{' '.join(sorted(result.zero_ideal_groups))}")
    print(f"mean ndcg@{args.k} {result.mean:.6f}")
    return EXIT_OK


def cmd_asq(args) -> int:
    _require(args, "sessions", "out")
    sessions = _read_sessions(args.sessions)
    corpus = dm.load_corpus(args.corpus) if args.corpus else None
    caps = ft.AsqCaps(max_queries=args.max_queries, max_titles=args.max_titles)
    count = 0
    with open(args.out, "w", encoding="utf-8") as fh:
        for session in sessions:
            for turn_index in range(len(session.turns)):
                key = dm.turn_group_key(session, turn_index)
                asq = ft.assemble_session_query(session, turn_index, corpus, caps)
                fh.write(f"{key}\t{asq}\n")
                count += 1
    print(f"wrote {count} ASQ rows to {args.out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _resolve(args)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SessionRankError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # invariant violations and bugs
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
