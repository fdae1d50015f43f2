"""Input parsing and text preparation.

The corpus, topic and sentence-split rules mirror the ranking engine's file
contracts; the sentence rule is re-implemented here and fixture-checked
against the engine's output so the exported keys line up exactly.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

_WORD_RE = re.compile(r"[A-Za-z0-9]+")
_SENTENCE_SPLIT_RE = re.compile(r"[.!?](?=\s|$)")
_FIELD_TAG_RE = re.compile(r"\[[^\]]*\]")
_LINE_REF_RE = re.compile(r"#\d+")
_OPERATORS = {"and", "or", "not"}


@dataclass(frozen=True)
class CorpusDoc:
    pmid: str
    title: str
    abstract: str


@dataclass(frozen=True)
class TopicRecord:
    id: str
    title: str
    boolean_query_raw: str


def parse_corpus(path) -> list[CorpusDoc]:
    """Line-delimited JSON records; only pmid/title/abstract are consumed."""
    docs = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {lineno}: invalid record: {exc}") from exc
            pmid = str(obj.get("pmid", ""))
            if not pmid:
                raise ValueError(f"{path}: line {lineno}: missing pmid")
            if pmid in seen:
                raise ValueError(f"{path}: line {lineno}: duplicate pmid {pmid}")
            seen.add(pmid)
            docs.append(CorpusDoc(pmid, str(obj.get("title", "")), str(obj.get("abstract", ""))))
    return docs


def parse_topics(path) -> list[TopicRecord]:
    """Topic blocks: Topic/Title lines plus indented Query lines."""
    with open(path, encoding="utf-8") as fh:
        content = fh.read()
    topics = []
    for block in re.split(r"\n\s*\n", content):
        if not block.strip():
            continue
        topic_id = title = None
        query_lines: list[str] = []
        section = None
        for line in block.splitlines():
            if line.startswith("Topic:"):
                topic_id = line[len("Topic:"):].strip()
            elif line.startswith("Title:"):
                title = line[len("Title:"):].strip()
            elif line.strip() == "Query:":
                section = "query"
            elif line.strip() == "Pids:":
                section = "pids"
            elif section == "query":
                query_lines.append(line.strip())
        if not topic_id or title is None:
            raise ValueError(f"{path}: malformed topic block")
        topics.append(TopicRecord(topic_id, title, "\n".join(query_lines)))
    return topics


def split_sentences(text: str) -> list[str]:
    """Split at '.', '!' or '?' followed by whitespace or end; trim; keep
    segments with at least two word tokens."""
    sentences = []
    for segment in _SENTENCE_SPLIT_RE.split(text):
        segment = segment.strip()
        if segment and len(_WORD_RE.findall(segment)) >= 2:
            sentences.append(segment)
    return sentences


def doc_sentences(doc: CorpusDoc) -> list[str]:
    return split_sentences(doc.title) + split_sentences(doc.abstract)


def query_text(topic: TopicRecord) -> str:
    """Title followed by the Boolean query's content words.

    Search syntax (line references, field tags, operators, symbols) is
    stripped; the words themselves are left unstemmed since the encoder
    expects natural text.
    """
    cleaned = _LINE_REF_RE.sub(" ", topic.boolean_query_raw)
    cleaned = _FIELD_TAG_RE.sub(" ", cleaned)
    words = [w for w in _WORD_RE.findall(cleaned) if w.lower() not in _OPERATORS]
    return " ".join(_WORD_RE.findall(topic.title) + words)
