"""Score fusion: pool per-sentence scores into a document score and
linearly interpolate it with the baseline score.

fused = lambda * baseline + (1 - lambda) * pooled, with per-topic min-max
normalization of both inputs (on by default, since BM25 scores are unbounded
while cosine scores are not).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from .embeddings import SentenceScores, score_sentences
from .errors import DataError
from .index import Ranking, make_ranking

log = logging.getLogger(__name__)

POOLING_MODES = ("mean", "max", "weighted")


@dataclass(frozen=True)
class FusionParams:
    lam: float = 0.8
    pooling: str = "mean"
    weights: tuple[float, ...] | None = None  # weighted pooling; None means all ones
    normalize_inputs: bool = True

    def __post_init__(self):
        if not 0 <= self.lam <= 1:
            raise ValueError("lambda must be in [0, 1]")
        if self.pooling not in POOLING_MODES:
            raise ValueError(f"pooling must be one of {POOLING_MODES}")
        if self.weights is not None:
            if self.pooling != "weighted":
                raise ValueError("weights are only valid with weighted pooling")
            if not all(math.isfinite(w) and w >= 0 for w in self.weights):
                raise ValueError("weights must be finite and >= 0")


def pool_sentence_scores(scores: SentenceScores, params: FusionParams) -> float:
    """mean / max / weighted-sum aggregation; empty score lists pool to 0."""
    values = scores.scores
    if not values:
        return 0.0
    if params.pooling == "mean":
        return sum(values) / len(values)
    if params.pooling == "max":
        return max(values)
    weights = params.weights if params.weights is not None else (1.0,) * len(values)
    if len(weights) != len(values):
        raise ValueError(
            f"{len(weights)} weights for {len(values)} sentence scores "
            f"(topic {scores.topic_id}, pmid {scores.pmid})"
        )
    return sum(w * s for w, s in zip(weights, values))


def minmax_normalize(scores: dict[str, float]) -> dict[str, float]:
    """Map onto [0, 1]; an all-equal input maps to all 0.5."""
    if not scores:
        raise ValueError("cannot normalize an empty score map")
    low, high = min(scores.values()), max(scores.values())
    if high == low:
        return {k: 0.5 for k in scores}
    span = high - low
    return {k: (v - low) / span for k, v in scores.items()}


def fuse_run(
    baseline: Ranking,
    new_scores: dict[str, float],
    params: FusionParams,
    tag: str | None = None,
) -> Ranking:
    """Interpolate baseline and new scores, re-sort, reassign ranks.

    Pmids missing from new_scores contribute 0 after normalization; the
    count is logged as a warning.
    """
    base = {e.pmid: e.score for e in baseline.entries}
    missing = [p for p in base if p not in new_scores]
    if missing:
        log.warning(
            "topic %s: %d of %d documents have no new score",
            baseline.topic_id, len(missing), len(base),
        )
    present = {p: s for p, s in new_scores.items() if p in base}
    if params.normalize_inputs:
        base_n = minmax_normalize(base)
        new_n = minmax_normalize(present) if present else {}
    else:
        base_n, new_n = base, present
    lam = params.lam
    fused = {p: lam * base_n[p] + (1.0 - lam) * new_n.get(p, 0.0) for p in base}
    if tag is None:
        tag = baseline.entries[0].tag if baseline.entries else "fused"
    return make_ranking(baseline.topic_id, fused.items(), tag)


class ProviderScoreSource:
    """Sentence scores computed on the fly from corpus text and an embedding
    provider. Pmids absent from the corpus have no text, hence no sentences."""

    def __init__(self, topics, docs_by_pmid, queries: dict[str, str], provider):
        self.topics = {t.id: t for t in topics}
        self.docs_by_pmid = docs_by_pmid
        self.queries = queries
        self.provider = provider

    def get(self, topic_id: str, pmid: str) -> list[float] | None:
        doc = self.docs_by_pmid.get(pmid)
        if doc is None:
            return []
        topic = self.topics.get(topic_id)
        if topic is None or topic_id not in self.queries:
            raise DataError(f"no formulated query for run topic {topic_id}")
        scores = score_sentences(topic, doc, self.provider, self.queries[topic_id])
        return list(scores.scores)


class FileScoreSource:
    """Sentence scores read from a Birch-style file; absent entries are
    reported as missing."""

    def __init__(self, table: dict[tuple[str, str], list[float]]):
        self.table = table

    def get(self, topic_id: str, pmid: str) -> list[float] | None:
        return self.table.get((topic_id, pmid))


def rerank_pipeline(
    baseline_runs: dict[str, Ranking],
    scores_source,
    params: FusionParams,
    tag: str = "fused",
    missing_tolerance: float = 0.0,
) -> dict[str, Ranking]:
    """Pool sentence scores per document, then fuse every topic's run.

    A topic whose fraction of score-less documents exceeds missing_tolerance
    is an error (default tolerance 0: any missing document fails).
    """
    fused: dict[str, Ranking] = {}
    for topic_id in sorted(baseline_runs):
        ranking = baseline_runs[topic_id]
        pooled: dict[str, float] = {}
        missing: list[str] = []
        for entry in ranking.entries:
            values = scores_source.get(topic_id, entry.pmid)
            if values is None:
                missing.append(entry.pmid)
            else:
                pooled[entry.pmid] = pool_sentence_scores(
                    SentenceScores(topic_id, entry.pmid, tuple(values)), params
                )
        if missing and len(missing) / len(ranking.entries) > missing_tolerance:
            raise DataError(
                f"topic {topic_id}: no sentence scores for {len(missing)} of "
                f"{len(ranking.entries)} documents (first missing pmid {missing[0]})"
            )
        fused[topic_id] = fuse_run(ranking, pooled, params, tag)
    return fused
