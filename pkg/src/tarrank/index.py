"""Inverted index, TF-IDF vectors, BM25 scoring, RM3 feedback expansion and
subset-restricted retrieval, plus the TREC run and on-disk index formats."""

from __future__ import annotations

import math
import struct
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .corpus import Document, Topic, TokenizerConfig, tokenize
from .errors import DataError
from .query import Query, QueryTerm, expand_query_tfidf, formulate_query

# §3.1 field set, in the order the text is concatenated for indexing.
ALL_FIELDS = ("title", "abstract", "pmid", "authors", "journal", "year", "mesh_terms", "medline_ta")

_INDEX_MAGIC = b"TARIDX1"
_INDEX_VERSION = 1


def pmid_sort_key(pmid: str):
    """Ascending, numeric-aware: all-digit ids compare by value, others
    lexicographically after them. Total order, used for every tie break."""
    if pmid.isdigit():
        return (0, int(pmid), pmid)
    return (1, 0, pmid)


def field_text(doc: Document, field: str) -> str:
    value = getattr(doc, field)
    if field == "authors" or field == "mesh_terms":
        return " ".join(value)
    if field == "year":
        return str(value) if value else ""
    return value


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError("k1 must be >= 0")
        if not 0 <= self.b <= 1:
            raise ValueError("b must be in [0, 1]")


@dataclass(frozen=True)
class Rm3Params:
    fb_terms: int = 10
    fb_docs: int = 10
    original_query_weight: float = 0.5

    def __post_init__(self):
        if self.fb_terms < 0:
            raise ValueError("fb_terms must be >= 0")
        if self.fb_docs < 1:
            raise ValueError("fb_docs must be >= 1")
        if not 0 <= self.original_query_weight <= 1:
            raise ValueError("original_query_weight must be in [0, 1]")


@dataclass(frozen=True)
class RunEntry:
    pmid: str
    rank: int
    score: float
    tag: str


@dataclass(frozen=True)
class Ranking:
    topic_id: str
    entries: tuple[RunEntry, ...]

    def __post_init__(self):
        seen = set()
        prev_score = None
        prev_pmid = None
        for i, entry in enumerate(self.entries):
            if entry.rank != i + 1:
                raise ValueError(f"topic {self.topic_id}: ranks not consecutive at {entry.rank}")
            if entry.pmid in seen:
                raise ValueError(f"topic {self.topic_id}: duplicate pmid {entry.pmid}")
            seen.add(entry.pmid)
            if prev_score is not None:
                if entry.score > prev_score:
                    raise ValueError(f"topic {self.topic_id}: scores increase at rank {entry.rank}")
                if entry.score == prev_score and pmid_sort_key(entry.pmid) < pmid_sort_key(prev_pmid):
                    raise ValueError(
                        f"topic {self.topic_id}: tie at rank {entry.rank} not in pmid order"
                    )
            prev_score, prev_pmid = entry.score, entry.pmid

    def pmids(self) -> list[str]:
        return [e.pmid for e in self.entries]


def make_ranking(topic_id: str, scored, tag: str) -> Ranking:
    """Sort (pmid, score) pairs descending by score, ties by ascending pmid."""
    ordered = sorted(scored, key=lambda ps: (-ps[1], pmid_sort_key(ps[0])))
    entries = tuple(
        RunEntry(pmid, rank, score, tag) for rank, (pmid, score) in enumerate(ordered, start=1)
    )
    return Ranking(topic_id, entries)


class InvertedIndex:
    """Immutable after construction; per-document term vectors are kept so
    RM3 feedback and TF-IDF vectors need no postings inversion."""

    def __init__(self, postings, doc_lengths, pmids, indexed_fields, config):
        self.postings: dict[str, list[tuple[int, int]]] = postings
        self.doc_lengths: list[int] = doc_lengths
        self.pmids: list[str] = pmids
        self.indexed_fields: tuple[str, ...] = indexed_fields
        self.config: TokenizerConfig = config
        self.doc_count = len(pmids)
        self.avg_doc_length = sum(doc_lengths) / len(doc_lengths) if doc_lengths else 0.0
        self.df = {term: len(plist) for term, plist in postings.items()}
        self.ordinal_of = {pmid: i for i, pmid in enumerate(pmids)}
        self._forward: list[dict[str, int]] = [{} for _ in pmids]
        for term, plist in postings.items():
            for ordinal, tf in plist:
                self._forward[ordinal][term] = tf

    def doc_terms(self, ordinal: int) -> dict[str, int]:
        return self._forward[ordinal]

    def vocabulary_size(self) -> int:
        return len(self.postings)


def build_index(
    docs: list[Document],
    fields: tuple[str, ...] = ALL_FIELDS,
    config: TokenizerConfig | None = None,
) -> InvertedIndex:
    if not docs:
        raise ValueError("cannot index an empty document list")
    if not fields:
        raise ValueError("indexed field set must be non-empty")
    unknown = [f for f in fields if f not in ALL_FIELDS]
    if unknown:
        raise ValueError(f"unknown index fields {unknown}")
    config = config or TokenizerConfig()
    ordered_fields = tuple(f for f in ALL_FIELDS if f in fields)

    postings: dict[str, list[tuple[int, int]]] = {}
    doc_lengths: list[int] = []
    pmids: list[str] = []
    seen: set[str] = set()
    for ordinal, doc in enumerate(docs):
        if doc.pmid in seen:
            raise DataError(f"duplicate pmid {doc.pmid} in index input")
        seen.add(doc.pmid)
        text = " ".join(field_text(doc, f) for f in ordered_fields)
        tokens = tokenize(text, config)
        doc_lengths.append(len(tokens))
        pmids.append(doc.pmid)
        for term, tf in sorted(Counter(tokens).items()):
            postings.setdefault(term, []).append((ordinal, tf))
    return InvertedIndex(postings, doc_lengths, pmids, ordered_fields, config)


# --- TF-IDF and cosine -----------------------------------------------------

def tfidf_weight(term: str, ordinal: int, index: InvertedIndex) -> float:
    """tf * ln(1 + N/df); 0 when the term does not occur in the document."""
    tf = index.doc_terms(ordinal).get(term, 0)
    if tf == 0:
        return 0.0
    return tf * math.log(1.0 + index.doc_count / index.df[term])


def tfidf_vector(ordinal: int, index: InvertedIndex) -> dict[str, float]:
    return {
        term: tf * math.log(1.0 + index.doc_count / index.df[term])
        for term, tf in index.doc_terms(ordinal).items()
    }


def cosine_similarity(u, v) -> float:
    """Cosine of two sparse (dict) or dense (sequence) vectors; 0 when either
    norm is zero. Dense vectors must share a dimension."""
    if isinstance(u, dict) != isinstance(v, dict):
        raise ValueError("cannot mix sparse and dense vectors")
    if isinstance(u, dict):
        dot = sum(w * v[t] for t, w in u.items() if t in v)
        nu = math.sqrt(sum(w * w for w in u.values()))
        nv = math.sqrt(sum(w * w for w in v.values()))
    else:
        if len(u) != len(v):
            raise ValueError(f"dimension mismatch: {len(u)} vs {len(v)}")
        dot = sum(a * b for a, b in zip(u, v))
        nu = math.sqrt(sum(a * a for a in u))
        nv = math.sqrt(sum(b * b for b in v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return dot / (nu * nv)


# --- BM25 ------------------------------------------------------------------

def bm25_idf(term: str, index: InvertedIndex) -> float:
    df = index.df.get(term, 0)
    return math.log(1.0 + (index.doc_count - df + 0.5) / (df + 0.5))


def bm25_score(query: Query, ordinal: int, index: InvertedIndex, params: Bm25Params) -> float:
    doc = index.doc_terms(ordinal)
    length = index.doc_lengths[ordinal]
    norm = 1.0 - params.b
    if index.avg_doc_length > 0:
        norm += params.b * length / index.avg_doc_length
    score = 0.0
    for term in query.terms:
        tf = doc.get(term.token, 0)
        if tf == 0:
            continue
        idf = bm25_idf(term.token, index)
        score += term.weight * idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm)
    return score


# --- RM3 -------------------------------------------------------------------

def rm3_expand(query: Query, initial: Ranking, index: InvertedIndex, params: Rm3Params) -> Query:
    """Relevance-model expansion from the top of an initial ranking.

    Document weights are the top-fb_docs scores shifted to a zero minimum and
    normalized to sum 1 (uniform if the shifted sum is 0). Feedback weight of
    a term is sum_d p(d) * tf(term, d) / len(d). The output interpolates the
    normalized original query with the renormalized top fb_terms feedback
    terms at original_query_weight : 1 - original_query_weight.
    """
    if not initial.entries:
        raise ValueError("initial ranking must be non-empty")
    top = initial.entries[: params.fb_docs]
    usable = [
        e for e in top
        if e.pmid in index.ordinal_of and index.doc_lengths[index.ordinal_of[e.pmid]] > 0
    ]
    if not usable:
        return query

    low = min(e.score for e in top)
    shifted = [e.score - low for e in top]
    total = sum(shifted)
    if total > 0:
        doc_weight = {e.pmid: s / total for e, s in zip(top, shifted)}
    else:
        doc_weight = {e.pmid: 1.0 / len(top) for e in top}

    feedback: dict[str, float] = {}
    for entry in usable:
        ordinal = index.ordinal_of[entry.pmid]
        length = index.doc_lengths[ordinal]
        p_d = doc_weight[entry.pmid]
        for term, tf in index.doc_terms(ordinal).items():
            feedback[term] = feedback.get(term, 0.0) + p_d * tf / length

    kept = sorted(feedback, key=lambda t: (-feedback[t], t))[: params.fb_terms]
    fb_total = sum(feedback[t] for t in kept)
    fb_weight = {t: feedback[t] / fb_total for t in kept} if fb_total > 0 else {}

    original: dict[str, float] = {}
    provenance: dict[str, str] = {}
    order: list[str] = []
    for term in query.terms:
        if term.token not in original:
            original[term.token] = 0.0
            provenance[term.token] = term.provenance
            order.append(term.token)
        original[term.token] += term.weight
    orig_total = sum(original.values())
    if orig_total <= 0:
        orig_norm = {t: 1.0 / len(original) for t in original}
    else:
        orig_norm = {t: w / orig_total for t, w in original.items()}

    alpha = params.original_query_weight
    terms = [
        QueryTerm(t, alpha * orig_norm[t] + (1.0 - alpha) * fb_weight.get(t, 0.0), provenance[t])
        for t in order
    ]
    for t in sorted(fb_weight, key=lambda t: (-fb_weight[t], t)):
        if t not in original:
            terms.append(QueryTerm(t, (1.0 - alpha) * fb_weight[t], "feedback"))
    return Query(query.topic_id, tuple(terms))


# --- subset retrieval and the baseline pipeline -----------------------------

def search_subset(
    query: Query,
    topic: Topic,
    index: InvertedIndex,
    params: Bm25Params,
    depth: int,
    tag: str = "tarrank",
) -> Ranking:
    """Score only the topic's candidate pmids. Candidates missing from the
    corpus are appended after every scored document (score = min - 1, pmid
    order) so the full A set is always rankable."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    scored = []
    missing = []
    for pmid in topic.candidate_pmids:
        ordinal = index.ordinal_of.get(pmid)
        if ordinal is None:
            missing.append(pmid)
        else:
            scored.append((pmid, bm25_score(query, ordinal, index, params)))
    scored.sort(key=lambda ps: (-ps[1], pmid_sort_key(ps[0])))
    sentinel = (scored[-1][1] - 1.0) if scored else -1.0
    ordered = scored + [(pmid, sentinel) for pmid in sorted(missing, key=pmid_sort_key)]
    ordered = ordered[: min(depth, len(topic.candidate_pmids))]
    entries = tuple(
        RunEntry(pmid, rank, score, tag) for rank, (pmid, score) in enumerate(ordered, start=1)
    )
    return Ranking(topic.id, entries)


def run_baseline(
    topics: list[Topic],
    docs: list[Document],
    index: InvertedIndex,
    abbrev=None,
    config: TokenizerConfig | None = None,
    bm25: Bm25Params | None = None,
    rm3: Rm3Params | None = None,
    qe_terms: int = 20,
    depth: int | None = None,
    tag: str = "tarrank",
    jobs: int = 1,
) -> tuple[dict[str, Ranking], list[tuple[str, str]]]:
    """formulate -> TF-IDF expansion -> BM25 (subset) -> RM3 -> BM25 (subset).

    Returns (topic id -> ranking, [(topic id, error)]); failing topics are
    skipped and reported, the rest of the run continues.
    """
    bm25 = bm25 or Bm25Params()
    rm3 = rm3 or Rm3Params()
    config = config or TokenizerConfig()
    by_pmid = {d.pmid: d for d in docs}

    def one(topic: Topic) -> Ranking:
        query = formulate_query(topic, abbrev, config)
        subset_docs = [by_pmid[p] for p in topic.candidate_pmids if p in by_pmid]
        if subset_docs:
            subindex = build_index(subset_docs, index.indexed_fields, config)
            query = expand_query_tfidf(query, subindex, qe_terms)
        topic_depth = depth if depth is not None else len(topic.candidate_pmids)
        first = search_subset(query, topic, index, bm25, len(topic.candidate_pmids), tag)
        expanded = rm3_expand(query, first, index, rm3)
        return search_subset(expanded, topic, index, bm25, topic_depth, tag)

    rankings: dict[str, Ranking] = {}
    errors: list[tuple[str, str]] = []
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {t.id: pool.submit(one, t) for t in topics}
        for topic in topics:
            try:
                rankings[topic.id] = futures[topic.id].result()
            except DataError as exc:
                errors.append((topic.id, str(exc)))
    else:
        for topic in topics:
            try:
                rankings[topic.id] = one(topic)
            except DataError as exc:
                errors.append((topic.id, str(exc)))
    return rankings, errors


# --- TREC run format --------------------------------------------------------

def write_run(rankings: dict[str, Ranking], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for topic_id in sorted(rankings):
            for e in rankings[topic_id].entries:
                fh.write(f"{topic_id} Q0 {e.pmid} {e.rank} {e.score!r} {e.tag}\n")


def parse_run(path) -> dict[str, Ranking]:
    grouped: dict[str, list[RunEntry]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6:
                raise DataError(f"{path}: line {lineno}: expected 6 fields, got {len(parts)}")
            topic_id, _q0, pmid, rank_str, score_str, tag = parts
            try:
                rank, score = int(rank_str), float(score_str)
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from exc
            grouped.setdefault(topic_id, []).append(RunEntry(pmid, rank, score, tag))
    rankings = {}
    for topic_id, entries in grouped.items():
        entries.sort(key=lambda e: e.rank)
        try:
            rankings[topic_id] = Ranking(topic_id, tuple(entries))
        except ValueError as exc:
            raise DataError(f"{path}: topic {topic_id}: {exc}") from exc
    return rankings


# --- on-disk index format ----------------------------------------------------

def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise DataError(f"{self.path}: truncated index file")
        chunk = self.blob[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def string(self) -> str:
        return self.take(self.u32()).decode("utf-8")


def save_index(index: InvertedIndex, path) -> None:
    out = [_INDEX_MAGIC, struct.pack("<B", _INDEX_VERSION)]
    out.append(struct.pack("<B", 1 if index.config.lowercase else 0))
    out.append(struct.pack("<B", 1 if index.config.stemmer == "porter" else 0))
    stopwords = sorted(index.config.stopword_list)
    out.append(struct.pack("<I", len(stopwords)))
    out.extend(_pack_str(w) for w in stopwords)
    out.append(struct.pack("<B", len(index.indexed_fields)))
    out.extend(_pack_str(f) for f in index.indexed_fields)
    out.append(struct.pack("<I", index.doc_count))
    for pmid, length in zip(index.pmids, index.doc_lengths):
        out.append(_pack_str(pmid))
        out.append(struct.pack("<I", length))
    out.append(struct.pack("<d", index.avg_doc_length))
    out.append(struct.pack("<I", len(index.postings)))
    for term in sorted(index.postings):
        plist = index.postings[term]
        out.append(_pack_str(term))
        out.append(struct.pack("<I", len(plist)))
        for ordinal, tf in plist:
            out.append(struct.pack("<II", ordinal, tf))
    with open(path, "wb") as fh:
        fh.write(b"".join(out))


def load_index(path) -> InvertedIndex:
    with open(path, "rb") as fh:
        blob = fh.read()
    reader = _Reader(blob, path)
    if reader.take(len(_INDEX_MAGIC)) != _INDEX_MAGIC:
        raise DataError(f"{path}: not an index file (bad magic)")
    version = reader.u8()
    if version != _INDEX_VERSION:
        raise DataError(f"{path}: unsupported index version {version}")
    lowercase = reader.u8() == 1
    stemmer = "porter" if reader.u8() == 1 else "none"
    stopwords = frozenset(reader.string() for _ in range(reader.u32()))
    config = TokenizerConfig(lowercase, stopwords, stemmer)
    fields = tuple(reader.string() for _ in range(reader.u8()))
    n = reader.u32()
    pmids, doc_lengths = [], []
    for _ in range(n):
        pmids.append(reader.string())
        doc_lengths.append(reader.u32())
    avg = reader.f64()
    postings: dict[str, list[tuple[int, int]]] = {}
    for _ in range(reader.u32()):
        term = reader.string()
        df = reader.u32()
        postings[term] = [struct.unpack("<II", reader.take(8)) for _ in range(df)]
    if reader.pos != len(blob):
        raise DataError(f"{path}: trailing bytes after index data")
    index = InvertedIndex(postings, doc_lengths, pmids, fields, config)
    if abs(index.avg_doc_length - avg) > 1e-9:
        raise DataError(f"{path}: stored average document length is inconsistent")
    return index
