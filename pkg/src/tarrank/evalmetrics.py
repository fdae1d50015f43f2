"""CLEF-TAR style evaluation: AP, Recall, NCG@k and norm_area per topic,
with macro averages and plot data (metric against topic size)."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

from .corpus import QrelSet, Topic
from .errors import DataError
from .index import Ranking

log = logging.getLogger(__name__)

METRIC_NAMES = ("ap", "recall", "ncg", "norm_area")


@dataclass(frozen=True)
class CutoffSpec:
    mode: str = "percent"  # percent | absolute
    value: float = 20.0

    def __post_init__(self):
        if self.mode not in ("percent", "absolute"):
            raise ValueError("cutoff mode must be 'percent' or 'absolute'")
        if self.mode == "percent" and not 0 < self.value <= 100:
            raise ValueError("percent cutoff must be in (0, 100]")
        if self.mode == "absolute" and self.value < 1:
            raise ValueError("absolute cutoff must be >= 1")

    def resolve(self, n: int) -> int:
        """Number of top documents the cutoff covers for a ranking of n."""
        if self.mode == "percent":
            return math.ceil(self.value * n / 100.0)
        return min(int(self.value), n)


@dataclass(frozen=True)
class TopicMetrics:
    ap: float
    recall: float
    ncg: float
    norm_area: float
    num_docs: int
    num_relevant: int
    no_relevant: bool = False  # R = 0 topic, flagged

    def value(self, metric: str) -> float:
        if metric not in METRIC_NAMES:
            raise ValueError(f"unknown metric {metric!r}; valid: {', '.join(METRIC_NAMES)}")
        return getattr(self, metric)


@dataclass
class MetricsReport:
    per_topic: dict[str, TopicMetrics]
    macro: dict[str, float]
    k_spec: CutoffSpec
    errors: list[tuple[str, str]] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)


def average_precision(ranking: Ranking, qrels: QrelSet) -> float:
    """Mean of precision at each relevant document's rank, over all R
    relevant documents in the qrels (ranked or not). R = 0 scores 0."""
    total_relevant = qrels.num_relevant(ranking.topic_id)
    if total_relevant == 0:
        return 0.0
    found = 0
    total = 0.0
    for i, entry in enumerate(ranking.entries, start=1):
        if qrels.relevance(ranking.topic_id, entry.pmid) == 1:
            found += 1
            total += found / i
    return total / total_relevant


def recall(ranking: Ranking, qrels: QrelSet, depth: int | None = None) -> float:
    total_relevant = qrels.num_relevant(ranking.topic_id)
    if total_relevant == 0:
        return 0.0
    entries = ranking.entries if depth is None else ranking.entries[:depth]
    found = sum(1 for e in entries if qrels.relevance(ranking.topic_id, e.pmid) == 1)
    return found / total_relevant


def ncg_at(ranking: Ranking, qrels: QrelSet, cutoff: CutoffSpec) -> float:
    """With binary relevance the normalised cumulative gain at the cutoff is
    the fraction of all relevant documents found by it."""
    total_relevant = qrels.num_relevant(ranking.topic_id)
    if total_relevant == 0:
        return 0.0
    c = cutoff.resolve(len(ranking.entries))
    found = sum(1 for e in ranking.entries[:c] if qrels.relevance(ranking.topic_id, e.pmid) == 1)
    return found / total_relevant


def norm_area(ranking: Ranking, qrels: QrelSet) -> float:
    """Area under the discrete cumulative recall curve over the area of the
    ideal relevant-first curve (unit-step right sums)."""
    total_relevant = qrels.num_relevant(ranking.topic_id)
    if total_relevant == 0:
        return 0.0
    n = len(ranking.entries)
    area = 0.0
    found = 0
    for entry in ranking.entries:
        if qrels.relevance(ranking.topic_id, entry.pmid) == 1:
            found += 1
        area += found / total_relevant
    optimal = sum(min(i, total_relevant) / total_relevant for i in range(1, n + 1))
    if optimal == 0.0:
        return 0.0
    return area / optimal


def evaluate_run(
    runs: dict[str, Ranking],
    qrels: QrelSet,
    cutoff: CutoffSpec | None = None,
    skip_empty: bool = False,
) -> MetricsReport:
    """Per-topic metrics plus macro means. Run topics without any qrels line
    are error entries; R = 0 topics are flagged and excluded from the macro
    only when skip_empty is set."""
    cutoff = cutoff or CutoffSpec()
    qrel_topics = qrels.topics()
    extra = qrel_topics - set(runs)
    if extra:
        log.warning("qrels contain %d topics not in the run; ignored", len(extra))
    per_topic: dict[str, TopicMetrics] = {}
    errors: list[tuple[str, str]] = []
    skipped: list[str] = []
    for topic_id in sorted(runs):
        if topic_id not in qrel_topics:
            errors.append((topic_id, "topic has no entries in the qrels"))
            continue
        ranking = runs[topic_id]
        r = qrels.num_relevant(topic_id)
        per_topic[topic_id] = TopicMetrics(
            ap=average_precision(ranking, qrels),
            recall=recall(ranking, qrels),
            ncg=ncg_at(ranking, qrels, cutoff),
            norm_area=norm_area(ranking, qrels),
            num_docs=len(ranking.entries),
            num_relevant=r,
            no_relevant=(r == 0),
        )
        if r == 0:
            skipped.append(topic_id)
    include = [
        t for t in per_topic
        if not (skip_empty and per_topic[t].no_relevant)
    ]
    macro = {}
    if include:
        for metric in METRIC_NAMES:
            macro[metric] = sum(per_topic[t].value(metric) for t in include) / len(include)
    return MetricsReport(per_topic, macro, cutoff, errors, skipped if skip_empty else [])


def plot_data(report: MetricsReport, topics: list[Topic], metric: str):
    """(topic id, topic size, metric value) rows sorted by ascending size."""
    if metric not in METRIC_NAMES:
        raise ValueError(f"unknown metric {metric!r}; valid: {', '.join(METRIC_NAMES)}")
    sizes = {t.id: len(t.candidate_pmids) for t in topics}
    rows = []
    for topic_id, metrics in report.per_topic.items():
        if topic_id not in sizes:
            raise ValueError(f"topic {topic_id} missing from the topic list")
        rows.append((topic_id, sizes[topic_id], metrics.value(metric)))
    rows.sort(key=lambda r: (r[1], r[0]))
    return rows


# --- CSV in/out ---------------------------------------------------------------

CSV_HEADER = ["topic", "ap", "recall", "ncg", "norm_area", "num_docs", "num_relevant"]


def write_metrics_csv(report: MetricsReport, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for topic_id in sorted(report.per_topic):
        m = report.per_topic[topic_id]
        writer.writerow(
            [topic_id, repr(m.ap), repr(m.recall), repr(m.ncg), repr(m.norm_area),
             m.num_docs, m.num_relevant]
        )


def read_metrics_csv(path, cutoff: CutoffSpec | None = None) -> MetricsReport:
    per_topic: dict[str, TopicMetrics] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise DataError(f"{path}: unexpected metrics CSV header {header}")
        for row in reader:
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise DataError(f"{path}: bad row {row}")
            try:
                topic_id = row[0]
                per_topic[topic_id] = TopicMetrics(
                    ap=float(row[1]), recall=float(row[2]), ncg=float(row[3]),
                    norm_area=float(row[4]), num_docs=int(row[5]),
                    num_relevant=int(row[6]), no_relevant=(int(row[6]) == 0),
                )
            except ValueError as exc:
                raise DataError(f"{path}: bad row {row}: {exc}") from exc
    macro = {}
    if per_topic:
        for metric in METRIC_NAMES:
            macro[metric] = sum(m.value(metric) for m in per_topic.values()) / len(per_topic)
    return MetricsReport(per_topic, macro, cutoff or CutoffSpec())


def format_metrics_table(report: MetricsReport) -> str:
    lines = [f"{'topic':<12} {'ap':>8} {'recall':>8} {'ncg':>8} {'n_area':>8} {'docs':>6} {'rel':>5}"]
    for topic_id in sorted(report.per_topic):
        m = report.per_topic[topic_id]
        flag = " (no relevant)" if m.no_relevant else ""
        lines.append(
            f"{topic_id:<12} {m.ap:8.4f} {m.recall:8.4f} {m.ncg:8.4f} "
            f"{m.norm_area:8.4f} {m.num_docs:6d} {m.num_relevant:5d}{flag}"
        )
    if report.macro:
        lines.append(
            f"{'MACRO':<12} {report.macro['ap']:8.4f} {report.macro['recall']:8.4f} "
            f"{report.macro['ncg']:8.4f} {report.macro['norm_area']:8.4f}"
        )
    for topic_id, message in report.errors:
        lines.append(f"ERROR {topic_id}: {message}")
    return "\n".join(lines) + "\n"
