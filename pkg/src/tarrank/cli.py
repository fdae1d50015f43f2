"""Command-line entry point: index, run, rerank, eval, stats, plot, selftest.

Settings resolve as flag > config file > built-in default. The config file
(INI) is named by --config or the TAR_RANK_CONFIG environment variable.
Logs go to stderr; data goes to stdout or --out files.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import filecmp
import logging
import os
import sys
import tempfile
from importlib import resources
from pathlib import Path

from . import corpus as corpusmod
from . import embeddings as embmod
from . import evalmetrics as evalmod
from . import fusion as fusionmod
from . import index as indexmod
from . import stats as statsmod
from .errors import DataError, NumericError
from .query import AbbreviationTable, default_abbreviations, expand_query_tfidf, formulate_query

log = logging.getLogger("tarrank")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class Config:
    """INI config file with typed lookups; missing file sections are empty."""

    def __init__(self, path: str | None):
        self.parser = configparser.ConfigParser()
        if path:
            if not os.path.exists(path):
                raise DataError(f"config file {path} does not exist")
            self.parser.read(path, encoding="utf-8")

    def get(self, section: str, key: str, flag, default, cast=str):
        if flag is not None:
            return flag
        if self.parser.has_option(section, key):
            raw = self.parser.get(section, key)
            try:
                if cast is bool:
                    return raw.strip().lower() in ("1", "true", "yes", "on")
                return cast(raw)
            except ValueError as exc:
                raise UsageError(f"config [{section}] {key}: {exc}") from exc
        return default


def _tokenizer_config(args, cfg: Config) -> corpusmod.TokenizerConfig:
    lowercase = cfg.get("tokenizer", "lowercase", args.lowercase, True, bool)
    stemmer = cfg.get("tokenizer", "stemmer", args.stemmer, "porter")
    stopwords_path = cfg.get("tokenizer", "stopwords", args.stopwords, None)
    if stemmer not in ("porter", "none"):
        raise UsageError(f"unknown stemmer {stemmer!r}")
    if stopwords_path:
        if not os.path.exists(stopwords_path):
            raise DataError(f"stopword file {stopwords_path} does not exist")
        words = Path(stopwords_path).read_text("utf-8").split()
        stopword_list = frozenset(words)
    else:
        stopword_list = corpusmod.DEFAULT_STOPWORDS
    return corpusmod.TokenizerConfig(lowercase, stopword_list, stemmer)


def _abbrev_table(args, cfg: Config) -> AbbreviationTable:
    path = cfg.get("paths", "abbreviations", getattr(args, "abbrev", None), None)
    if path in (None, ""):
        return default_abbreviations()
    if path == "none":
        return AbbreviationTable()
    if not os.path.exists(path):
        raise DataError(f"abbreviation file {path} does not exist")
    return AbbreviationTable.from_file(path)


def _require_path(value, what: str) -> str:
    if not value:
        raise UsageError(f"{what} is required (flag or config file)")
    if not os.path.exists(value):
        raise DataError(f"{what} {value} does not exist")
    return value


def _parse_fields(spec: str | None) -> tuple[str, ...]:
    if not spec:
        return indexmod.ALL_FIELDS
    fields = tuple(f.strip() for f in spec.split(",") if f.strip())
    if not fields:
        raise UsageError("empty field list")
    return fields


# --- commands -----------------------------------------------------------------

def cmd_index(args) -> int:
    cfg = Config(args.config)
    corpus_path = _require_path(cfg.get("paths", "corpus", args.corpus, None), "corpus file")
    out = cfg.get("paths", "index", args.out, None)
    if not out:
        raise UsageError("--out is required")
    config = _tokenizer_config(args, cfg)
    docs = corpusmod.parse_corpus(corpus_path)
    try:
        idx = indexmod.build_index(docs, _parse_fields(args.fields), config)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    indexmod.save_index(idx, out)
    print(
        f"documents={idx.doc_count} vocabulary={idx.vocabulary_size()} "
        f"avg_doc_length={idx.avg_doc_length!r}"
    )
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = Config(args.config)
    corpus_path = _require_path(cfg.get("paths", "corpus", args.corpus, None), "corpus file")
    topics_path = _require_path(cfg.get("paths", "topics", args.topics, None), "topics file")
    out = cfg.get("paths", "run", args.out, None)
    if not out:
        raise UsageError("--out is required")
    config = _tokenizer_config(args, cfg)
    abbrev = _abbrev_table(args, cfg)
    try:
        bm25 = indexmod.Bm25Params(
            cfg.get("bm25", "k1", args.k1, 0.9, float),
            cfg.get("bm25", "b", args.b, 0.4, float),
        )
        rm3 = indexmod.Rm3Params(
            cfg.get("rm3", "fb_terms", args.fb_terms, 10, int),
            cfg.get("rm3", "fb_docs", args.fb_docs, 10, int),
            cfg.get("rm3", "original_query_weight", args.rm3_weight, 0.5, float),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    qe_terms = cfg.get("query", "qe_terms", args.qe_terms, 20, int)
    if qe_terms < 1:
        raise UsageError("--qe-terms must be >= 1")
    depth = cfg.get("run", "depth", args.depth, None, int)
    tag = cfg.get("run", "tag", args.tag, "tarrank")
    jobs = cfg.get("run", "jobs", args.jobs, os.cpu_count() or 1, int)

    docs = corpusmod.parse_corpus(corpus_path)
    topics = corpusmod.parse_topics(topics_path)
    index_path = cfg.get("paths", "index", args.index, None)
    if index_path:
        idx = indexmod.load_index(_require_path(index_path, "index file"))
        if idx.config != config:
            # query tokens must match the index's terms
            log.info("using the tokenizer configuration stored in %s", index_path)
            config = idx.config
    else:
        idx = indexmod.build_index(docs, indexmod.ALL_FIELDS, config)
    rankings, errors = indexmod.run_baseline(
        topics, docs, idx, abbrev, config, bm25, rm3, qe_terms, depth, tag, jobs
    )
    indexmod.write_run(rankings, out)
    log.info("wrote %d topics to %s", len(rankings), out)
    for topic_id, message in errors:
        log.error("topic %s failed: %s", topic_id, message)
    if errors and not args.keep_going:
        return EXIT_DATA
    return EXIT_OK


def cmd_rerank(args) -> int:
    cfg = Config(args.config)
    run_path = _require_path(cfg.get("paths", "run", args.run, None), "baseline run file")
    out = args.out
    if not out:
        raise UsageError("--out is required")
    if args.no_normalize is not None:
        normalize = not args.no_normalize
    else:
        normalize = cfg.get("fusion", "normalize", None, True, bool)
    try:
        params = fusionmod.FusionParams(
            lam=cfg.get("fusion", "lambda", args.lam, 0.8, float),
            pooling=cfg.get("fusion", "pooling", args.pooling, "mean"),
            normalize_inputs=normalize,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    tolerance = cfg.get("fusion", "tolerance", args.tolerance, 0.0, float)
    tag = cfg.get("run", "tag", args.tag, "fused")
    runs = indexmod.parse_run(run_path)

    scores_path = cfg.get("paths", "sentence_scores", args.sentence_scores, None)
    embeddings_path = cfg.get("paths", "embeddings", args.embeddings, None)
    if scores_path:
        table = embmod.parse_sentence_scores(_require_path(scores_path, "sentence-scores file"))
        source = fusionmod.FileScoreSource(table)
    else:
        corpus_path = _require_path(cfg.get("paths", "corpus", args.corpus, None), "corpus file")
        topics_path = _require_path(cfg.get("paths", "topics", args.topics, None), "topics file")
        config = _tokenizer_config(args, cfg)
        abbrev = _abbrev_table(args, cfg)
        docs = corpusmod.parse_corpus(corpus_path)
        topics = corpusmod.parse_topics(topics_path)
        by_pmid = {d.pmid: d for d in docs}
        queries = {}
        for topic in topics:
            query = formulate_query(topic, abbrev, config)
            if args.qe_in_query:
                subset = [by_pmid[p] for p in topic.candidate_pmids if p in by_pmid]
                if subset:
                    subindex = indexmod.build_index(subset, indexmod.ALL_FIELDS, config)
                    query = expand_query_tfidf(
                        query, subindex, cfg.get("query", "qe_terms", args.qe_terms, 20, int)
                    )
            queries[topic.id] = query.text()
        if embeddings_path:
            store = embmod.load_embeddings(_require_path(embeddings_path, "embedding file"))
            provider = embmod.StoreEmbeddingProvider(store)
        else:
            provider = embmod.MockEmbeddingProvider(args.mock_dim, config)
        source = fusionmod.ProviderScoreSource(topics, by_pmid, queries, provider)

    fused = fusionmod.rerank_pipeline(runs, source, params, tag, tolerance)
    indexmod.write_run(fused, out)
    log.info("wrote %d fused topics to %s", len(fused), out)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = Config(args.config)
    run_path = _require_path(cfg.get("paths", "run", args.run, None), "run file")
    qrels_path = _require_path(cfg.get("paths", "qrels", args.qrels, None), "qrels file")
    try:
        cutoff = evalmod.CutoffSpec(
            cfg.get("eval", "cutoff_mode", args.cutoff_mode, "percent"),
            cfg.get("eval", "cutoff_value", args.cutoff, 20.0, float),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    runs = indexmod.parse_run(run_path)
    qrels = corpusmod.parse_qrels(qrels_path)
    report = evalmod.evaluate_run(runs, qrels, cutoff, args.skip_empty)
    sys.stdout.write(evalmod.format_metrics_table(report))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            evalmod.write_metrics_csv(report, fh)
        log.info("wrote metrics CSV to %s", args.out)
    return EXIT_OK


def _parse_model_args(models: list[str]) -> dict[str, str]:
    out = {}
    for spec in models:
        if "=" not in spec:
            raise UsageError(f"model argument {spec!r} must be TAG=metrics.csv")
        tag, path = spec.split("=", 1)
        if not tag or tag in out:
            raise UsageError(f"bad or duplicate model tag in {spec!r}")
        out[tag] = path
    if len(out) < 2:
        raise UsageError("stats needs at least two TAG=metrics.csv arguments")
    return out


def cmd_stats(args) -> int:
    cfg = Config(args.config)
    models = _parse_model_args(args.models)
    reports = {}
    for tag, path in models.items():
        reports[tag] = evalmod.read_metrics_csv(_require_path(path, f"metrics CSV for {tag}"))
    alpha = cfg.get("stats", "alpha", args.alpha, 0.05, float)
    report = statsmod.compare_models(reports, args.metric, args.mode, alpha)
    sys.stdout.write(statsmod.format_significance_matrix(report))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["model_a", "model_b", "t", "df", "p_raw", "p_adjusted", "cohens_d", "significant"]
            )
            for c in report.pairwise:
                writer.writerow(
                    [c.model_a, c.model_b, repr(c.t), c.df, repr(c.p_raw),
                     repr(c.p_adjusted), repr(c.cohens_d), int(c.significant)]
                )
        log.info("wrote pairwise CSV to %s", args.out)
    return EXIT_OK


def cmd_plot(args) -> int:
    cfg = Config(args.config)
    metrics_path = _require_path(args.metrics_csv, "metrics CSV")
    topics_path = _require_path(cfg.get("paths", "topics", args.topics, None), "topics file")
    report = evalmod.read_metrics_csv(metrics_path)
    topics = corpusmod.parse_topics(topics_path)
    try:
        rows = evalmod.plot_data(report, topics, args.metric)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    target = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.writer(target, lineterminator="\n")
        writer.writerow(["topic", "topic_size", args.metric])
        for topic_id, size, value in rows:
            writer.writerow([topic_id, size, repr(value)])
    finally:
        if args.out:
            target.close()
    return EXIT_OK


# --- selftest -------------------------------------------------------------------

def _fixture_dir() -> Path:
    return Path(str(resources.files("tarrank").joinpath("data/fixture")))


def _selftest_pipeline(outdir: Path) -> None:
    fixture = _fixture_dir()
    config = corpusmod.TokenizerConfig()
    docs = corpusmod.parse_corpus(fixture / "corpus.jsonl")
    topics = corpusmod.parse_topics(fixture / "topics.txt")
    qrels = corpusmod.parse_qrels(fixture / "qrels.txt")
    abbrev = default_abbreviations()

    idx = indexmod.build_index(docs, indexmod.ALL_FIELDS, config)
    indexmod.save_index(idx, outdir / "index.taridx")
    rankings, errors = indexmod.run_baseline(topics, docs, idx, abbrev, config, jobs=2)
    if errors:
        raise DataError(f"selftest baseline failed: {errors}")
    indexmod.write_run(rankings, outdir / "baseline.run")

    by_pmid = {d.pmid: d for d in docs}
    queries = {t.id: formulate_query(t, abbrev, config).text() for t in topics}
    provider = embmod.MockEmbeddingProvider(64, config)
    source = fusionmod.ProviderScoreSource(topics, by_pmid, queries, provider)
    params = fusionmod.FusionParams(lam=0.8, pooling="mean")
    fused = fusionmod.rerank_pipeline(rankings, source, params, "fused")
    indexmod.write_run(fused, outdir / "fused.run")

    for name, runs in (("baseline", rankings), ("fused", fused)):
        report = evalmod.evaluate_run(runs, qrels)
        with open(outdir / f"{name}.metrics.csv", "w", encoding="utf-8") as fh:
            evalmod.write_metrics_csv(report, fh)

    reports = {
        "A": evalmod.read_metrics_csv(outdir / "baseline.metrics.csv"),
        "G": evalmod.read_metrics_csv(outdir / "fused.metrics.csv"),
    }
    stats_report = statsmod.compare_models(reports, "ap", "paired")
    with open(outdir / "stats.csv", "w", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for c in stats_report.pairwise:
            writer.writerow(
                [c.model_a, c.model_b, repr(c.t), c.df, repr(c.p_raw), repr(c.p_adjusted),
                 repr(c.cohens_d), int(c.significant)]
            )
    (outdir / "matrix.txt").write_text(
        statsmod.format_significance_matrix(stats_report), "utf-8"
    )

    report = evalmod.read_metrics_csv(outdir / "fused.metrics.csv")
    rows = evalmod.plot_data(report, topics, "ap")
    with open(outdir / "plot.csv", "w", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["topic", "topic_size", "ap"])
        for topic_id, size, value in rows:
            writer.writerow([topic_id, size, repr(value)])


_SELFTEST_FILES = (
    "index.taridx", "baseline.run", "fused.run", "baseline.metrics.csv",
    "fused.metrics.csv", "stats.csv", "matrix.txt", "plot.csv",
)


def _oracle_checks() -> list[tuple[str, bool]]:
    from .porter import stem

    checks = []
    checks.append(("porter generalizations -> gener", stem("generalizations") == "gener"))
    checks.append(("t_cdf(0, 5) = 0.5", statsmod.t_cdf(0.0, 5) == 0.5))
    ranking = indexmod.make_ranking("T", [("1", 3.0), ("2", 2.0), ("3", 1.0)], "t")
    qrels = corpusmod.QrelSet({("T", "1"): 1, ("T", "3"): 1})
    checks.append(
        ("ap [rel, non, rel] = 5/6", abs(evalmod.average_precision(ranking, qrels) - 5 / 6) < 1e-12)
    )
    qrels_last = corpusmod.QrelSet({("T", "3"): 1})
    checks.append(
        ("norm_area relevant-last n=3 = 1/3",
         abs(evalmod.norm_area(ranking, qrels_last) - 1 / 3) < 1e-12)
    )
    checks.append(("eq1 spot 0.8*1.0 + 0.2*0.7 = 0.94", abs(0.8 * 1.0 + 0.2 * 0.7 - 0.94) < 1e-12))
    return checks


def cmd_selftest(args) -> int:
    failures = 0
    for name, ok in _oracle_checks():
        print(f"selftest: {name}: {'ok' if ok else 'FAIL'}")
        failures += 0 if ok else 1
    with tempfile.TemporaryDirectory(prefix="tarrank-selftest-") as tmp:
        dir_a, dir_b = Path(tmp) / "a", Path(tmp) / "b"
        dir_a.mkdir()
        dir_b.mkdir()
        _selftest_pipeline(dir_a)
        _selftest_pipeline(dir_b)
        for name in _SELFTEST_FILES:
            same = filecmp.cmp(dir_a / name, dir_b / name, shallow=False)
            print(f"selftest: {name} byte-identical across runs: {'ok' if same else 'FAIL'}")
            failures += 0 if same else 1
    if failures:
        log.error("%d selftest checks failed", failures)
        return EXIT_DATA
    return EXIT_OK


# --- argument wiring -------------------------------------------------------------

def _add_tokenizer_flags(p):
    p.add_argument("--stemmer", choices=["porter", "none"], default=None)
    p.add_argument("--stopwords", default=None, help="path to a stopword list")
    p.add_argument("--lowercase", action="store_const", const=True, default=None,
                   help="force lowercasing on (default)")


def build_parser() -> _Parser:
    parser = _Parser(prog="tar-rank", description=__doc__)
    parser.add_argument("--config", default=None,
                        help="INI config file (default: $TAR_RANK_CONFIG)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build and persist the inverted index")
    p.add_argument("--corpus")
    p.add_argument("--out")
    p.add_argument("--fields", help="comma-separated field subset")
    _add_tokenizer_flags(p)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("run", help="BM25 + RM3 baseline over topic subsets")
    p.add_argument("--corpus")
    p.add_argument("--topics")
    p.add_argument("--index", help="persisted index (default: build in memory)")
    p.add_argument("--out")
    p.add_argument("--abbrev", help="abbreviation table path, or 'none'")
    p.add_argument("--qe-terms", type=int, default=None)
    p.add_argument("--k1", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    p.add_argument("--fb-terms", type=int, default=None)
    p.add_argument("--fb-docs", type=int, default=None)
    p.add_argument("--rm3-weight", type=float, default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--tag", default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--keep-going", action="store_true")
    _add_tokenizer_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("rerank", help="fuse sentence scores into a baseline run")
    p.add_argument("--run")
    p.add_argument("--out")
    p.add_argument("--corpus")
    p.add_argument("--topics")
    p.add_argument("--abbrev")
    p.add_argument("--embeddings", help="EMB1 embedding file")
    p.add_argument("--sentence-scores", help="Birch-style sentence-scores file")
    p.add_argument("--mock-dim", type=int, default=256)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--pooling", choices=list(fusionmod.POOLING_MODES), default=None)
    p.add_argument("--no-normalize", action="store_const", const=True, default=None)
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--tag", default=None)
    p.add_argument("--qe-in-query", action="store_true",
                   help="include TF-IDF expansion terms in the similarity query text")
    p.add_argument("--qe-terms", type=int, default=None)
    _add_tokenizer_flags(p)
    p.set_defaults(func=cmd_rerank)

    p = sub.add_parser("eval", help="AP / recall / NCG / norm_area per topic")
    p.add_argument("--run")
    p.add_argument("--qrels")
    p.add_argument("--cutoff-mode", choices=["percent", "absolute"], default=None)
    p.add_argument("--cutoff", type=float, default=None)
    p.add_argument("--skip-empty", action="store_true",
                   help="exclude topics without relevant documents from the macro")
    p.add_argument("--out", help="write the machine CSV here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="ANOVA + pairwise t-tests across model CSVs")
    p.add_argument("models", nargs="+", metavar="TAG=metrics.csv")
    p.add_argument("--metric", choices=list(evalmod.METRIC_NAMES), default="ap")
    p.add_argument("--mode", choices=["paired", "unpaired-pooled"], default="paired")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--out", help="write the pairwise CSV here")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("plot", help="metric against topic size as CSV")
    p.add_argument("--metrics-csv", required=True)
    p.add_argument("--topics")
    p.add_argument("--metric", choices=list(evalmod.METRIC_NAMES), default="ap")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("selftest", help="run the bundled fixtures and determinism checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config is None:
            args.config = os.environ.get("TAR_RANK_CONFIG") or None
        if args.config and not os.path.exists(args.config):
            raise DataError(f"config file {args.config} does not exist")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
