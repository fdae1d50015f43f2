"""Batch embedding export into the EMB1 file format.

Keys follow the ranking engine's store contract: ``q:<topic_id>`` for each
formulated query string and ``s:<pmid>:<i>`` for sentence i of a document's
title + abstract. Inputs longer than max_tokens are truncated by the
encoder's own tokenizer.
"""

from __future__ import annotations

import logging
import os
import tempfile
from dataclasses import dataclass

from .textprep import doc_sentences, parse_corpus, parse_topics, query_text

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExportJob:
    corpus_path: str
    topics_path: str
    model: str  # sentence-transformers model id or local path
    out_path: str
    max_tokens: int = 512
    batch_size: int = 32

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


class EncoderLoadError(Exception):
    pass


def load_encoder(model: str, max_tokens: int):
    from sentence_transformers import SentenceTransformer

    try:
        encoder = SentenceTransformer(model)
    except Exception as exc:
        raise EncoderLoadError(f"cannot load encoder {model!r}: {exc}") from exc
    encoder.max_seq_length = min(max_tokens, encoder.max_seq_length or max_tokens)
    return encoder


def encoder_dim(encoder) -> int:
    getter = getattr(encoder, "get_embedding_dimension", None) or getattr(
        encoder, "get_sentence_embedding_dimension"
    )
    dim = getter()
    if not dim:
        raise EncoderLoadError("encoder does not report an embedding dimension")
    return int(dim)


def collect_texts(job: ExportJob) -> dict[str, str]:
    """key -> text for every query and document sentence."""
    texts: dict[str, str] = {}
    for topic in parse_topics(job.topics_path):
        texts[f"q:{topic.id}"] = query_text(topic)
    for doc in parse_corpus(job.corpus_path):
        for i, sentence in enumerate(doc_sentences(doc)):
            texts[f"s:{doc.pmid}:{i}"] = sentence
    return texts


def export_embeddings(job: ExportJob, encoder=None) -> dict:
    """Encode every key's text and write the EMB1 file atomically.

    Returns a summary dict with key counts and the embedding dimension.
    A batch whose vectors do not match the encoder's dimension aborts the
    run before anything is written over the output path.
    """
    if encoder is None:
        encoder = load_encoder(job.model, job.max_tokens)
    dim = encoder_dim(encoder)
    texts = collect_texts(job)
    keys = sorted(texts)

    vectors: dict[str, list[float]] = {}
    for start in range(0, len(keys), job.batch_size):
        batch = keys[start : start + job.batch_size]
        encoded = encoder.encode(
            [texts[k] for k in batch], batch_size=job.batch_size, convert_to_numpy=True,
        )
        for key, row in zip(batch, encoded):
            values = [float(v) for v in row]
            if len(values) != dim:
                raise RuntimeError(
                    f"embedding dimension drifted: key {key!r} has {len(values)} values, "
                    f"encoder reports {dim}"
                )
            vectors[key] = values

    out_dir = os.path.dirname(os.path.abspath(job.out_path)) or "."
    fd, tmp_path = tempfile.mkstemp(prefix=".emb-", dir=out_dir, text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(f"EMB1 {dim}\n")
            for key in keys:
                fh.write(key + " " + " ".join(repr(v) for v in vectors[key]) + "\n")
        os.replace(tmp_path, job.out_path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise

    queries = sum(1 for k in keys if k.startswith("q:"))
    summary = {"dim": dim, "queries": queries, "sentences": len(keys) - queries}
    log.info(
        "wrote %d query and %d sentence embeddings (dim %d) to %s",
        summary["queries"], summary["sentences"], dim, job.out_path,
    )
    return summary
