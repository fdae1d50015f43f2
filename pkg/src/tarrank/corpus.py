"""Documents, topics, relevance judgments and the shared tokenization pipeline.

The corpus file is line-delimited JSON (one flat object per document), the
topic file is a block format (Topic/Title/Query/Pids sections) and qrels are
standard TREC ``topic iteration pmid relevance`` lines.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources

from .errors import DataError
from .porter import stem as porter_stem

_TOKEN_RE = re.compile(r"[A-Za-z0-9]+")


def _load_default_stopwords() -> frozenset[str]:
    text = resources.files(__package__).joinpath("data/stopwords.txt").read_text("utf-8")
    return frozenset(w for w in text.split() if w)


DEFAULT_STOPWORDS = _load_default_stopwords()


@dataclass(frozen=True)
class TokenizerConfig:
    lowercase: bool = True
    stopword_list: frozenset[str] = DEFAULT_STOPWORDS
    stemmer: str = "porter"  # porter | none

    def __post_init__(self):
        if self.stemmer not in ("porter", "none"):
            raise ValueError(f"unknown stemmer {self.stemmer!r}")


def tokenize(text: str, config: TokenizerConfig | None = None) -> list[str]:
    """Split on non-alphanumeric boundaries, lowercase, drop stopwords, stem.

    Stopwords are compared after lowercasing. Stemmed output is filtered
    against the stopword list once more so no emitted token is ever a
    stopword, and empty stems are dropped.
    """
    config = config or TokenizerConfig()
    stopwords = config.stopword_list
    out = []
    for raw in _TOKEN_RE.findall(text):
        token = raw.lower() if config.lowercase else raw
        if token in stopwords:
            continue
        if config.stemmer == "porter":
            token = porter_stem(token)
            if not token or token in stopwords:
                continue
        out.append(token)
    return out


@dataclass(frozen=True)
class Document:
    pmid: str
    title: str = ""
    abstract: str = ""
    authors: tuple[str, ...] = ()
    journal: str = ""
    year: int = 0
    mesh_terms: tuple[str, ...] = ()
    medline_ta: str = ""

    def __post_init__(self):
        if not self.pmid:
            raise ValueError("pmid must be non-empty")
        if self.year != 0 and not 1800 <= self.year <= 2100:
            raise ValueError(f"year {self.year} outside [1800, 2100]")


@dataclass(frozen=True)
class Topic:
    id: str
    title: str
    boolean_query_raw: str
    candidate_pmids: tuple[str, ...]  # the A set, in file order, deduplicated

    def __post_init__(self):
        if not self.id:
            raise ValueError("topic id must be non-empty")
        if not self.candidate_pmids:
            raise ValueError(f"topic {self.id}: candidate pmid set is empty")


@dataclass(frozen=True)
class QrelSet:
    judgments: dict[tuple[str, str], int] = field(default_factory=dict)

    def __post_init__(self):
        relevant: dict[str, set[str]] = {}
        topics = set()
        for (topic_id, pmid), rel in self.judgments.items():
            topics.add(topic_id)
            if rel == 1:
                relevant.setdefault(topic_id, set()).add(pmid)
        object.__setattr__(self, "_topics", topics)
        object.__setattr__(self, "_relevant", relevant)

    def relevance(self, topic_id: str, pmid: str) -> int:
        """Unjudged pairs count as irrelevant."""
        return self.judgments.get((topic_id, pmid), 0)

    def topics(self) -> set[str]:
        return set(self._topics)

    def relevant_pmids(self, topic_id: str) -> set[str]:
        return set(self._relevant.get(topic_id, ()))

    def num_relevant(self, topic_id: str) -> int:
        return len(self._relevant.get(topic_id, ()))


# --- corpus file -----------------------------------------------------------

_DOC_FIELDS = {"pmid", "title", "abstract", "authors", "journal", "year", "mesh", "medline_ta"}


def parse_corpus(path) -> list[Document]:
    docs: list[Document] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: line {lineno}: invalid record: {exc}") from exc
            if not isinstance(obj, dict):
                raise DataError(f"{path}: line {lineno}: record is not an object")
            unknown = set(obj) - _DOC_FIELDS
            if unknown:
                raise DataError(f"{path}: line {lineno}: unknown fields {sorted(unknown)}")
            try:
                doc = Document(
                    pmid=str(obj.get("pmid", "")),
                    title=str(obj.get("title", "")),
                    abstract=str(obj.get("abstract", "")),
                    authors=tuple(str(a) for a in obj.get("authors", [])),
                    journal=str(obj.get("journal", "")),
                    year=int(obj.get("year", 0) or 0),
                    mesh_terms=tuple(str(m) for m in obj.get("mesh", [])),
                    medline_ta=str(obj.get("medline_ta", "")),
                )
            except (ValueError, TypeError) as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from exc
            if doc.pmid in seen:
                raise DataError(f"{path}: line {lineno}: duplicate pmid {doc.pmid}")
            seen.add(doc.pmid)
            docs.append(doc)
    return docs


def write_corpus(docs: list[Document], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            obj = {
                "pmid": doc.pmid,
                "title": doc.title,
                "abstract": doc.abstract,
                "authors": list(doc.authors),
                "journal": doc.journal,
                "year": doc.year,
                "mesh": list(doc.mesh_terms),
                "medline_ta": doc.medline_ta,
            }
            fh.write(json.dumps(obj, sort_keys=True, ensure_ascii=False) + "\n")


# --- topic file ------------------------------------------------------------

def parse_topics(path) -> list[Topic]:
    with open(path, encoding="utf-8") as fh:
        content = fh.read()
    topics: list[Topic] = []
    seen: set[str] = set()
    blocks = [b for b in re.split(r"\n\s*\n", content) if b.strip()]
    for block in blocks:
        lines = block.splitlines()
        topic_id = None
        title = None
        query_lines: list[str] = []
        pids: list[str] = []
        section = None
        for line in lines:
            if line.startswith("Topic:"):
                topic_id = line[len("Topic:"):].strip()
                section = None
            elif line.startswith("Title:"):
                title = line[len("Title:"):].strip()
                section = None
            elif line.strip() == "Query:":
                section = "query"
            elif line.strip() == "Pids:":
                section = "pids"
            elif section == "query":
                query_lines.append(line.strip())
            elif section == "pids":
                pid = line.strip()
                if pid:
                    pids.append(pid)
            elif line.strip():
                raise DataError(f"{path}: unexpected line in topic block: {line.strip()!r}")
        label = topic_id or "<missing id>"
        if topic_id is None:
            raise DataError(f"{path}: topic {label}: missing Topic section")
        if topic_id in seen:
            raise DataError(f"{path}: duplicate topic id {topic_id}")
        if title is None:
            raise DataError(f"{path}: topic {label}: missing Title section")
        if not query_lines:
            raise DataError(f"{path}: topic {label}: missing Query section")
        if not pids:
            raise DataError(f"{path}: topic {label}: missing or empty Pids section")
        seen.add(topic_id)
        deduped = tuple(dict.fromkeys(pids))
        topics.append(Topic(topic_id, title, "\n".join(query_lines), deduped))
    return topics


# --- qrels -----------------------------------------------------------------

def parse_qrels(path) -> QrelSet:
    judgments: dict[tuple[str, str], int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise DataError(f"{path}: line {lineno}: expected 4 fields, got {len(parts)}")
            topic_id, _iteration, pmid, rel_str = parts
            if rel_str not in ("0", "1"):
                raise DataError(f"{path}: line {lineno}: relevance {rel_str!r} not in {{0, 1}}")
            judgments[(topic_id, pmid)] = int(rel_str)
    return QrelSet(judgments)


def write_qrels(qrels: QrelSet, path) -> None:
    from .index import pmid_sort_key  # deterministic pmid ordering within a topic

    with open(path, "w", encoding="utf-8") as fh:
        for (topic_id, pmid) in sorted(qrels.judgments, key=lambda k: (k[0], pmid_sort_key(k[1]))):
            fh.write(f"{topic_id} 0 {pmid} {qrels.judgments[(topic_id, pmid)]}\n")
