"""Query construction: Boolean-query cleanup, title concatenation and
TF-IDF thesaurus-style expansion over a topic's candidate documents."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from importlib import resources

from .corpus import Topic, TokenizerConfig, tokenize
from .errors import DataError

_FIELD_TAG_RE = re.compile(r"\[[^\]]*\]")
_LINE_REF_RE = re.compile(r"#\d+")
_OPERATOR_RE = re.compile(r"^(and|or|not)$", re.IGNORECASE)


@dataclass(frozen=True)
class QueryTerm:
    token: str
    weight: float
    provenance: str  # title | boolean | expansion | feedback

    def __post_init__(self):
        if not math.isfinite(self.weight) or self.weight < 0:
            raise ValueError(f"term {self.token!r}: weight must be finite and >= 0")


@dataclass(frozen=True)
class Query:
    topic_id: str
    terms: tuple[QueryTerm, ...]

    def tokens(self) -> list[str]:
        return [t.token for t in self.terms]

    def text(self) -> str:
        return " ".join(t.token for t in self.terms)


class AbbreviationTable:
    """Lowercased abbreviation -> expansion phrase."""

    def __init__(self, entries: dict[str, str] | None = None):
        self.entries: dict[str, str] = {}
        for key, value in (entries or {}).items():
            lowered = key.lower()
            if lowered in self.entries:
                raise DataError(f"duplicate abbreviation {lowered!r}")
            self.entries[lowered] = value

    def expand(self, token: str) -> str | None:
        return self.entries.get(token.lower())

    @classmethod
    def from_file(cls, path) -> "AbbreviationTable":
        entries: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip() or line.startswith("#"):
                    continue
                if "\t" not in line:
                    raise DataError(f"{path}: line {lineno}: expected 'abbrev<TAB>expansion'")
                key, value = line.rstrip("\n").split("\t", 1)
                lowered = key.strip().lower()
                if lowered in entries:
                    raise DataError(f"{path}: line {lineno}: duplicate abbreviation {lowered!r}")
                entries[lowered] = value.strip()
        return cls(entries)


def default_abbreviations() -> AbbreviationTable:
    text = resources.files("tarrank").joinpath("data/abbreviations.txt").read_text("utf-8")
    entries: dict[str, str] = {}
    for line in text.splitlines():
        if line.strip():
            key, value = line.split("\t", 1)
            entries[key.strip().lower()] = value.strip()
    return AbbreviationTable(entries)


def preprocess_boolean_query(
    raw: str,
    abbrev: AbbreviationTable | None = None,
    config: TokenizerConfig | None = None,
) -> list[str]:
    """Strip search syntax from a raw Boolean query and tokenize what remains.

    Removes line-number references (#1), bracketed field tags ([mh], [tiab]),
    Boolean operators and all symbols; expands abbreviations on whole-token
    matches before stemming. Duplicates are preserved.
    """
    abbrev = abbrev or AbbreviationTable()
    cleaned = _LINE_REF_RE.sub(" ", raw)
    cleaned = _FIELD_TAG_RE.sub(" ", cleaned)
    words = []
    for word in re.findall(r"[A-Za-z0-9]+", cleaned):
        if _OPERATOR_RE.match(word):
            continue
        expansion = abbrev.expand(word)
        words.append(expansion if expansion is not None else word)
    tokens = tokenize(" ".join(words), config)
    return [t for t in tokens if not _OPERATOR_RE.match(t)]


def formulate_query(
    topic: Topic,
    abbrev: AbbreviationTable | None = None,
    config: TokenizerConfig | None = None,
) -> Query:
    """Title tokens followed by preprocessed Boolean-query tokens, weight 1.0."""
    terms = [QueryTerm(t, 1.0, "title") for t in tokenize(topic.title, config)]
    terms += [
        QueryTerm(t, 1.0, "boolean")
        for t in preprocess_boolean_query(topic.boolean_query_raw, abbrev, config)
    ]
    if not terms:
        raise DataError(f"topic {topic.id}: formulated query is empty")
    return Query(topic.id, tuple(terms))


def expand_query_tfidf(query: Query, index, k: int) -> Query:
    """Append the top-k collection terms by summed TF-IDF weight.

    Terms already present in the query are skipped; ties break
    lexicographically ascending. Existing terms are never reweighted.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scores: dict[str, float] = {}
    for term, postings in index.postings.items():
        idf = math.log(1.0 + index.doc_count / index.df[term])
        scores[term] = idf * sum(tf for _, tf in postings)
    existing = set(query.tokens())
    candidates = sorted(
        (term for term in scores if term not in existing),
        key=lambda t: (-scores[t], t),
    )
    added = tuple(QueryTerm(t, 1.0, "expansion") for t in candidates[:k])
    return Query(query.topic_id, query.terms + added)
