"""Command-line interface.

Subcommands: index, env, run, eval, compare, pipeline. Exit codes:
0 on success, 2 for usage problems and malformed or inconsistent
inputs, 1 for unexpected internal failures. Every random choice in a
command is derived from its --seed, so rerunning with equal inputs
produces byte-identical output files.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Mapping, Sequence

from . import __version__
from .corpus import (Corpus, CorpusError, FoldAssignment, HeadingQuery,
                     all_queries, assign_folds, derive_qrels, load_corpus,
                     read_qrels, write_qrels)
from .envgen import (CandidateSet, EnvSpec, build_test_env, build_train_env,
                     generate_candidates, read_candidates, write_candidates)
from .evaluation import (RunFile, RunFormatError, evaluate_run, format_metrics,
                         paired_t_test, read_run, run_from_rankings,
                         write_metrics, write_run)
from .expansion import build_heading_support
from .index import Index, Ranking, build_index, load_index, save_index
from .ltr import (CaConfig, FeatureVector, assemble_feature_table,
                  cross_validate, save_model)
from .methods import (InvalidCombinationError, MethodEngine, MethodParams,
                      VALID_COMBINATIONS)
from .semvec import (CachingLinker, EmbeddingStore, EntityLinker, EntityStats,
                     build_entity_stats, load_embeddings, load_entity_stats,
                     load_gazetteer)
from .textproc import DEFAULT_CONFIG, TokenPipelineConfig, load_stopwords
from .utils import derive_seed


class CliInputError(ValueError):
    """Inconsistent input detected at the command layer."""


_INPUT_ERRORS = (CorpusError, RunFormatError, InvalidCombinationError,
                 CliInputError, ValueError, OSError)


# --- shared plumbing ----------------------------------------------------

def _token_config(args: argparse.Namespace) -> TokenPipelineConfig:
    path = getattr(args, "stopwords", None)
    if path is None:
        return DEFAULT_CONFIG
    return TokenPipelineConfig(stopwords=load_stopwords(path))


def _method_params(args: argparse.Namespace, method: str,
                   expansion: str) -> MethodParams:
    return MethodParams(
        method=method, expansion=expansion,
        k1=args.k1, b=args.b, mu=args.mu, lam=args.lam,
        fb_docs=args.fb_docs, fb_terms=args.fb_terms,
        fb_entities=args.fb_entities,
        rocchio_passages=args.rocchio_passages,
    )


class _Resources:
    """Lazily loaded semantic resources shared across engines."""

    def __init__(self, args: argparse.Namespace, texts: Mapping[str, str]):
        self._args = args
        self._texts = texts
        self._embeddings: EmbeddingStore | None = None
        self._linker: EntityLinker | None = None
        self._stats: EntityStats | None = None

    def embeddings(self) -> EmbeddingStore:
        if self._embeddings is None:
            if not getattr(self._args, "embeddings", None):
                raise CliInputError("this method requires --embeddings")
            self._embeddings = load_embeddings(self._args.embeddings)
        return self._embeddings

    def linker(self) -> EntityLinker:
        if self._linker is None:
            if not getattr(self._args, "gazetteer", None):
                raise CliInputError("this method requires --gazetteer")
            self._linker = CachingLinker(load_gazetteer(self._args.gazetteer))
        return self._linker

    def entity_stats(self) -> EntityStats:
        if self._stats is None:
            if getattr(self._args, "entity_stats", None):
                self._stats = load_entity_stats(self._args.entity_stats)
            else:
                self._stats = build_entity_stats(self._texts, self.linker())
        return self._stats


def _build_engine(params: MethodParams, ix: Index, texts: Mapping[str, str],
                  res: _Resources, corpus: Corpus,
                  folds: FoldAssignment | None) -> tuple[MethodEngine, dict[int, object] | None]:
    """Engine plus, for Rocchio, the per-held-out-fold support indexes."""
    kwargs: dict = {}
    if params.method in ("glove-cs", "entity-cs"):
        kwargs["embeddings"] = res.embeddings()
    if params.method == "entity-cs" or params.expansion == "ent-rm1":
        kwargs["linker"] = res.linker()
    if params.method == "entity-cs":
        kwargs["entity_stats"] = res.entity_stats()
    supports = None
    if params.expansion == "rocchio":
        assert folds is not None
        supports = {f: build_heading_support(corpus, folds, f)
                    for f in range(folds.k)}
        kwargs["support"] = supports[0]
    engine = MethodEngine(ix, texts, params=params, **kwargs)
    return engine, supports


def _rank_queries(engine: MethodEngine, queries: Sequence[HeadingQuery],
                  candidates: Mapping[str, CandidateSet] | None,
                  k: int, folds: FoldAssignment | None,
                  supports: Mapping[int, object] | None) -> list[Ranking]:
    rankings = []
    for query in sorted(queries, key=lambda q: q.query_id):
        if supports is not None:
            assert folds is not None
            engine.support = supports[folds.fold_of(query.page_id)]
        pool = None
        if candidates is not None:
            pool = candidates[query.query_id].paragraph_ids
        rankings.append(engine.rank(query, k=k, candidates=pool))
    return rankings


def _validate_candidates(sets: Mapping[str, CandidateSet], ix: Index,
                         known_queries: set[str]) -> None:
    for qid, cs in sets.items():
        if qid not in known_queries:
            raise CliInputError(
                f"candidate query {qid!r} does not belong to this corpus")
        for pid in cs.paragraph_ids:
            if pid not in ix:
                raise CliInputError(
                    f"candidate paragraph {pid!r} is not in the index")


def _texts(corpus: Corpus) -> dict[str, str]:
    return {pid: p.text for pid, p in corpus.paragraphs.items()}


# --- subcommands --------------------------------------------------------

def cmd_index(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    ix = build_index(_texts(corpus), _token_config(args))
    save_index(ix, args.out)
    print(f"indexed {ix.n_docs} paragraphs, {len(ix.postings)} terms -> {args.out}")
    return 0


def cmd_env(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    if args.mode == "train":
        spec = EnvSpec(neg_same_article=args.neg_same,
                       neg_other_article=args.neg_other, seed=args.seed)
        sets = build_train_env(corpus, spec)
    else:
        sets = build_test_env(corpus, seed=args.seed)
    write_candidates(sets, args.out)
    if args.qrels_out:
        write_qrels(derive_qrels(corpus), args.qrels_out)
    short = sum(1 for cs in sets.values()
                if cs.deficit_same or cs.deficit_other)
    total = sum(len(cs.paragraph_ids) for cs in sets.values())
    print(f"wrote {args.mode} environment: {len(sets)} headings, "
          f"{total} candidates, {short} headings short of budget -> {args.out}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    texts = _texts(corpus)
    cfg = _token_config(args)
    ix = load_index(args.index) if args.index else build_index(texts, cfg)
    queries = all_queries(corpus, cfg)
    params = _method_params(args, args.method, args.expansion)
    res = _Resources(args, texts)
    folds = None
    if params.expansion == "rocchio":
        folds = assign_folds(corpus, args.ltr_folds, args.seed)
    engine, supports = _build_engine(params, ix, texts, res, corpus, folds)

    candidates = None
    skipped = 0
    if args.candidates:
        candidates = read_candidates(args.candidates)
        _validate_candidates(candidates, ix, {q.query_id for q in queries})
        before = len(queries)
        queries = [q for q in queries if q.query_id in candidates]
        skipped = before - len(queries)

    rankings = _rank_queries(engine, queries, candidates, args.k, folds, supports)
    name = args.run_name or f"{args.method}+{args.expansion}"
    run = run_from_rankings(name, rankings)
    write_run(run, args.out)
    note = f", {skipped} corpus queries absent from the candidate file" if skipped else ""
    print(f"wrote run {name!r}: {len(rankings)} queries -> {args.out}{note}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    report = evaluate_run(read_run(args.run), read_qrels(args.qrels))
    text = format_metrics(report, per_query=args.per_query)
    sys.stdout.write(text)
    if args.out:
        write_metrics(report, args.out, per_query=args.per_query)
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    qrels = read_qrels(args.qrels)
    run_a = read_run(args.run_a)
    run_b = read_run(args.run_b)
    report_a = evaluate_run(run_a, qrels)
    report_b = evaluate_run(run_b, qrels)
    ap_a = {q: v[0] for q, v in report_a.per_query.items()}
    ap_b = {q: v[0] for q, v in report_b.per_query.items()}
    result = paired_t_test(ap_a, ap_b, alpha=args.alpha)
    better = result.p_value < result.alpha and result.mean_diff > 0
    lines = [
        f"map-a\t{report_a.map:.6f}\t{run_a.name}",
        f"map-b\t{report_b.map:.6f}\t{run_b.name}",
        f"mean-diff\t{result.mean_diff:.6f}",
        f"t-statistic\t{result.t_statistic:.6f}",
        f"p-value\t{result.p_value:.6g}",
        f"alpha\t{result.alpha:g}",
        f"a-significantly-worse\t{'yes' if result.significant_worse else 'no'}",
        f"a-significantly-better\t{'yes' if better else 'no'}",
    ]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return 0


def _parse_scorers(args: argparse.Namespace) -> list[tuple[str, str, str]]:
    """(feature name, method, expansion) triples from --scorers."""
    if args.scorers:
        specs = [s.strip() for s in args.scorers.split(",") if s.strip()]
    else:
        specs = ["bm25", "tfidf-cs"]
        if args.embeddings:
            specs.append("glove-cs")
        if args.embeddings and args.gazetteer:
            specs.append("entity-cs")
    out: list[tuple[str, str, str]] = []
    for spec in specs:
        method, _, expansion = spec.partition("+")
        out.append((spec, method.strip(), expansion.strip() or "none"))
    names = [n for n, _, _ in out]
    if len(set(names)) != len(names):
        raise CliInputError("duplicate scorer in --scorers")
    return out


def _drop_feature(table: Mapping[str, list[FeatureVector]],
                  names: Sequence[str], drop: str) -> tuple[dict[str, list[FeatureVector]], list[str]]:
    idx = list(names).index(drop)
    kept = [n for n in names if n != drop]
    out: dict[str, list[FeatureVector]] = {}
    for qid, rows in table.items():
        out[qid] = [
            FeatureVector(r.query_id, r.paragraph_id,
                          r.features[:idx] + r.features[idx + 1:])
            for r in rows
        ]
    return out, kept


def cmd_pipeline(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus = load_corpus(args.corpus)
    texts = _texts(corpus)
    cfg = _token_config(args)
    ix = load_index(args.index) if args.index else build_index(texts, cfg)
    queries = sorted(all_queries(corpus, cfg), key=lambda q: q.query_id)
    qrels = derive_qrels(corpus)
    write_qrels(qrels, str(out_dir / "qrels.txt"))

    candidates = generate_candidates(ix, queries, k=args.candidate_k)
    write_candidates(candidates, str(out_dir / "candidates.tsv"))

    scorers = _parse_scorers(args)
    res = _Resources(args, texts)
    need_rocchio = any(exp == "rocchio" for _, _, exp in scorers)
    folds = assign_folds(corpus, args.ltr_folds, args.seed) if need_rocchio else None

    runs: list[RunFile] = []
    reports_by_name: dict[str, object] = {}
    for name, method, expansion in scorers:
        params = _method_params(args, method, expansion)
        engine, supports = _build_engine(params, ix, texts, res, corpus, folds)
        rankings = _rank_queries(engine, queries, candidates, args.candidate_k,
                                 folds, supports)
        run = run_from_rankings(name, rankings)
        runs.append(run)
        write_run(run, str(out_dir / f"run-{_safe(name)}.txt"))
        report = evaluate_run(run, qrels)
        reports_by_name[name] = report
        write_metrics(report, str(out_dir / f"metrics-{_safe(name)}.txt"))

    if args.external_scores:
        external = read_run(args.external_scores)
        if external.name in [r.name for r in runs]:
            raise CliInputError(
                f"external run name {external.name!r} collides with a scorer")
        runs.append(external)

    feature_names = [r.name for r in runs]
    table = assemble_feature_table(runs)
    ca_cfg = CaConfig(seed=derive_seed(args.seed, "ltr"),
                      restarts=args.restarts, iterations=args.iterations)
    merged, fold_reports = cross_validate(table, qrels, feature_names,
                                          k=args.ltr_folds, cfg=ca_cfg)
    fused = RunFile(name="fused", rankings=merged)
    write_run(fused, str(out_dir / "run-fused.txt"))
    fused_report = evaluate_run(fused, qrels)
    write_metrics(fused_report, str(out_dir / "metrics-fused.txt"))

    with open(out_dir / "folds.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("fold\ttrain-queries\ttest-queries\ttrain-map\tweights\n")
        for rep in fold_reports:
            weights = " ".join(f"{w:.6f}" for w in rep.model.weights)
            fh.write(f"{rep.fold}\t{len(rep.train_queries)}\t"
                     f"{len(rep.test_queries)}\t{rep.train_map:.6f}\t{weights}\n")
            save_model(rep.model, str(out_dir / f"model-fold{rep.fold}.txt"))

    fused_ap = {q: v[0] for q, v in fused_report.per_query.items()}
    sig_lines = ["baseline\tmap\tfused-map\tmean-diff\tt\tp\tfused-worse"]
    for name, _, _ in scorers:
        report = reports_by_name[name]
        ap = {q: v[0] for q, v in report.per_query.items()}
        result = paired_t_test(fused_ap, ap, alpha=args.alpha)
        sig_lines.append(
            f"{name}\t{report.map:.6f}\t{fused_report.map:.6f}\t"
            f"{result.mean_diff:.6f}\t{result.t_statistic:.4f}\t"
            f"{result.p_value:.6g}\t{'yes' if result.significant_worse else 'no'}")
    with open(out_dir / "significance.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(sig_lines) + "\n")

    summary = [f"{name}\tMAP {reports_by_name[name].map:.6f}" for name, _, _ in scorers]
    summary.append(f"fused\tMAP {fused_report.map:.6f}")

    if args.without:
        if args.without not in feature_names:
            raise CliInputError(
                f"--without {args.without!r} is not one of {feature_names}")
        if len(feature_names) < 2:
            raise CliInputError("cannot ablate the only feature")
        ab_table, ab_names = _drop_feature(table, feature_names, args.without)
        ab_merged, _ = cross_validate(ab_table, qrels, ab_names,
                                      k=args.ltr_folds, cfg=ca_cfg)
        ab_run = RunFile(name=f"fused-wo-{args.without}", rankings=ab_merged)
        tag = _safe(args.without)
        write_run(ab_run, str(out_dir / f"run-fused-wo-{tag}.txt"))
        ab_report = evaluate_run(ab_run, qrels)
        write_metrics(ab_report, str(out_dir / f"metrics-fused-wo-{tag}.txt"))
        summary.append(f"fused-wo-{args.without}\tMAP {ab_report.map:.6f}")

    print("\n".join(summary))
    return 0


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


# --- parser -------------------------------------------------------------

def _add_method_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--fb-docs", type=int, default=10,
                   help="feedback paragraphs for relevance models")
    p.add_argument("--fb-terms", type=int, default=10,
                   help="feedback terms kept by rm1")
    p.add_argument("--fb-entities", type=int, default=10,
                   help="feedback entities kept by ent-rm1")
    p.add_argument("--rocchio-passages", type=int, default=5,
                   help="max same-heading passages per query")
    p.add_argument("--lambda", dest="lam", type=float, default=0.5,
                   help="weight on the original query when mixing in feedback")
    p.add_argument("--mu", type=float, default=1500.0,
                   help="Dirichlet smoothing for feedback retrieval")
    p.add_argument("--k1", type=float, default=1.2, help="bm25 k1")
    p.add_argument("--b", type=float, default=0.75, help="bm25 b")
    p.add_argument("--embeddings", help="word/entity vector table")
    p.add_argument("--gazetteer", help="surface<TAB>entityId dictionary")
    p.add_argument("--entity-stats",
                   help="entity link-frequency file (default: derived from the corpus)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="headingrank",
        description="Passage retrieval experiments over outline-structured corpora.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build and save an inverted index")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stopwords")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("env", help="generate a candidate environment")
    p.add_argument("--corpus", required=True)
    p.add_argument("--mode", choices=("train", "test"), required=True)
    p.add_argument("--out", required=True, help="candidate file to write")
    p.add_argument("--qrels-out", help="also write the derived labels here")
    p.add_argument("--neg-same", type=int, default=5,
                   help="same-article negatives per true paragraph (train mode)")
    p.add_argument("--neg-other", type=int, default=5,
                   help="other-article negatives per true paragraph (train mode)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_env)

    p = sub.add_parser("run", help="rank paragraphs for every heading query")
    p.add_argument("--corpus", required=True)
    p.add_argument("--index", help="saved index (default: build in memory)")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--candidates", help="restrict scoring to this candidate file")
    group.add_argument("--env", dest="candidates",
                       help="alias for --candidates (environment file)")
    p.add_argument("--method", default="bm25",
                   choices=sorted(VALID_COMBINATIONS))
    p.add_argument("--expansion", default="none",
                   choices=("none", "rm1", "ent-rm1", "rocchio"))
    _add_method_flags(p)
    p.add_argument("--ltr-folds", type=int, default=5,
                   help="folds used to scope heading support for rocchio")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=100,
                   help="ranking depth in full-collection mode")
    p.add_argument("--out", required=True)
    p.add_argument("--run-name")
    p.add_argument("--stopwords")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score a run against labels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--per-query", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="paired t-test between two runs")
    p.add_argument("--run-a", required=True)
    p.add_argument("--run-b", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("pipeline",
                       help="candidates, scorers, cross-validated fusion, reports")
    p.add_argument("--corpus", required=True)
    p.add_argument("--index", help="saved index (default: build in memory)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--candidate-k", type=int, default=100)
    p.add_argument("--scorers",
                   help="comma list like 'bm25,tfidf-cs+rocchio' "
                        "(default: bm25,tfidf-cs plus any method whose "
                        "resources were supplied)")
    p.add_argument("--external-scores",
                   help="run file of precomputed scores to add as a feature")
    p.add_argument("--without", help="drop this feature and refit for ablation")
    p.add_argument("--ltr-folds", type=int, default=5)
    p.add_argument("--restarts", type=int, default=5,
                   help="random restarts for coordinate ascent")
    p.add_argument("--iterations", type=int, default=25,
                   help="max ascent sweeps per restart")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stopwords")
    _add_method_flags(p)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr)
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
