"""Sentence segmentation, embedding providers and per-sentence similarity.

Real embeddings arrive through the EMB1 file format (keys ``q:<topic>`` and
``s:<pmid>:<i>``); the mock provider is a deterministic hashed bag-of-tokens
embedder so the whole pipeline runs offline.
"""

from __future__ import annotations

import math
import re
import struct
from dataclasses import dataclass

from .corpus import Document, Topic, TokenizerConfig, tokenize
from .errors import DataError
from .index import cosine_similarity

_SENTENCE_SPLIT_RE = re.compile(r"[.!?](?=\s|$)")
_MIN_SENTENCE_TOKENS = 2
# The minimum-length check counts raw word tokens: no stopword filtering, so
# a sentence like "A result" keeps both its words.
_COUNT_CONFIG = TokenizerConfig(stopword_list=frozenset(), stemmer="none")


def _f32(x: float) -> float:
    return struct.unpack("<f", struct.pack("<f", x))[0]


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]  # quantized to float32 on construction

    def __post_init__(self):
        if not self.values:
            raise ValueError("embedding dimension must be >= 1")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("embedding values must be finite")
        object.__setattr__(self, "values", tuple(_f32(v) for v in self.values))

    @property
    def dim(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class SentenceScores:
    topic_id: str
    pmid: str
    scores: tuple[float, ...]


class EmbeddingStore:
    def __init__(self, dim: int, vectors: dict[str, EmbeddingVector] | None = None):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.vectors: dict[str, EmbeddingVector] = {}
        for key, vec in (vectors or {}).items():
            self.add(key, vec)

    def add(self, key: str, vec: EmbeddingVector) -> None:
        if key in self.vectors:
            raise DataError(f"duplicate embedding key {key!r}")
        if vec.dim != self.dim:
            raise DataError(f"embedding key {key!r}: dim {vec.dim} != store dim {self.dim}")
        self.vectors[key] = vec

    def __eq__(self, other):
        return (
            isinstance(other, EmbeddingStore)
            and self.dim == other.dim
            and self.vectors == other.vectors
        )


def split_sentences(text: str) -> list[str]:
    """Split at '.', '!' or '?' followed by whitespace or end of text.

    Segments are trimmed and dropped when they hold fewer than two raw word
    tokens. Abbreviation mis-splits are accepted.
    """
    sentences = []
    for segment in _SENTENCE_SPLIT_RE.split(text):
        segment = segment.strip()
        if segment and len(tokenize(segment, _COUNT_CONFIG)) >= _MIN_SENTENCE_TOKENS:
            sentences.append(segment)
    return sentences


def doc_sentences(doc: Document) -> list[str]:
    """Sentences of title ++ abstract; the title is segmented on its own so a
    punctuation-free title never merges into the first abstract sentence."""
    return split_sentences(doc.title) + split_sentences(doc.abstract)


def fnv1a64(data: str) -> int:
    h = 0xCBF29CE484222325
    for byte in data.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def mock_embed(text: str, dim: int, config: TokenizerConfig | None = None) -> EmbeddingVector:
    """Hashed bag-of-tokens embedding: +1 at fnv1a64(token) mod dim per
    pipeline token, then L2-normalized. The zero vector stays zero."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    values = [0.0] * dim
    for token in tokenize(text, config):
        values[fnv1a64(token) % dim] += 1.0
    norm = math.sqrt(sum(v * v for v in values))
    if norm > 0:
        values = [v / norm for v in values]
    return EmbeddingVector(tuple(values))


class MockEmbeddingProvider:
    def __init__(self, dim: int = 256, config: TokenizerConfig | None = None):
        self.dim = dim
        self.config = config

    def query_vector(self, topic_id: str, text: str) -> EmbeddingVector:
        return mock_embed(text, self.dim, self.config)

    def sentence_vector(self, pmid: str, idx: int, text: str) -> EmbeddingVector:
        return mock_embed(text, self.dim, self.config)


class StoreEmbeddingProvider:
    def __init__(self, store: EmbeddingStore):
        self.store = store

    def _lookup(self, key: str) -> EmbeddingVector:
        vec = self.store.vectors.get(key)
        if vec is None:
            raise DataError(f"embedding store is missing key {key!r}")
        return vec

    def query_vector(self, topic_id: str, text: str) -> EmbeddingVector:
        return self._lookup(f"q:{topic_id}")

    def sentence_vector(self, pmid: str, idx: int, text: str) -> EmbeddingVector:
        return self._lookup(f"s:{pmid}:{idx}")


def score_sentences(topic: Topic, doc: Document, provider, query_text: str) -> SentenceScores:
    """Cosine between the query embedding and each sentence embedding."""
    sentences = doc_sentences(doc)
    if not sentences:
        return SentenceScores(topic.id, doc.pmid, ())
    query_vec = provider.query_vector(topic.id, query_text)
    scores = tuple(
        cosine_similarity(query_vec.values, provider.sentence_vector(doc.pmid, i, s).values)
        for i, s in enumerate(sentences)
    )
    return SentenceScores(topic.id, doc.pmid, scores)


# --- EMB1 file format --------------------------------------------------------

def save_embeddings(store: EmbeddingStore, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"EMB1 {store.dim}\n")
        for key in sorted(store.vectors):
            if re.search(r"\s", key):
                raise ValueError(f"embedding key {key!r} contains whitespace")
            floats = " ".join(repr(v) for v in store.vectors[key].values)
            fh.write(f"{key} {floats}\n")


def load_embeddings(path) -> EmbeddingStore:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2 or parts[0] != "EMB1":
            raise DataError(f"{path}: bad embedding file header {header.strip()!r}")
        try:
            dim = int(parts[1])
        except ValueError as exc:
            raise DataError(f"{path}: bad dimension in header") from exc
        if dim < 1:
            raise DataError(f"{path}: dimension must be >= 1")
        store = EmbeddingStore(dim)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            fields = line.split()
            key, floats = fields[0], fields[1:]
            if len(floats) != dim:
                raise DataError(
                    f"{path}: key {key!r}: {len(floats)} values under dim-{dim} header"
                )
            try:
                vec = EmbeddingVector(tuple(float(f) for f in floats))
            except (ValueError, OverflowError) as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from exc
            store.add(key, vec)
    return store


# --- Birch-style sentence-scores file ----------------------------------------

def parse_sentence_scores(path) -> dict[tuple[str, str], list[float]]:
    """Lines of ``topic pmid sentence_index score``; indexes per document must
    form a contiguous 0..n-1 range."""
    raw: dict[tuple[str, str], dict[int, float]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise DataError(f"{path}: line {lineno}: expected 4 fields, got {len(parts)}")
            topic_id, pmid, idx_str, score_str = parts
            try:
                idx, score = int(idx_str), float(score_str)
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from exc
            if not math.isfinite(score):
                raise DataError(f"{path}: line {lineno}: score must be finite")
            entry = raw.setdefault((topic_id, pmid), {})
            if idx in entry:
                raise DataError(f"{path}: line {lineno}: duplicate sentence index {idx}")
            entry[idx] = score
    table: dict[tuple[str, str], list[float]] = {}
    for key, scores in raw.items():
        n = len(scores)
        if sorted(scores) != list(range(n)):
            raise DataError(
                f"sentence scores for topic {key[0]} pmid {key[1]} are not contiguous from 0"
            )
        table[key] = [scores[i] for i in range(n)]
    return table
