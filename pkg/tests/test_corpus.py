import json

import pytest

from tarrank.corpus import (
    Document,
    QrelSet,
    Topic,
    parse_corpus,
    parse_qrels,
    parse_topics,
    write_corpus,
    write_qrels,
)
from tarrank.errors import DataError


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestParseCorpus:
    def test_field_passthrough(self, tmp_path):
        line = {
            "pmid": "101", "title": "A", "abstract": "B", "authors": ["X Y"],
            "journal": "J", "year": 1999, "mesh": ["M1", "M2"], "medline_ta": "J",
        }
        path = _write(tmp_path / "c.jsonl", json.dumps(line) + "\n")
        docs = parse_corpus(path)
        assert len(docs) == 1
        doc = docs[0]
        assert doc.pmid == "101"
        assert doc.title == "A"
        assert doc.abstract == "B"
        assert doc.authors == ("X Y",)
        assert doc.year == 1999
        assert doc.mesh_terms == ("M1", "M2")

    def test_empty_file(self, tmp_path):
        assert parse_corpus(_write(tmp_path / "c.jsonl", "")) == []

    def test_duplicate_pmid(self, tmp_path):
        text = '{"pmid": "7", "title": "a"}\n{"pmid": "7", "title": "b"}\n'
        with pytest.raises(DataError, match="duplicate pmid 7"):
            parse_corpus(_write(tmp_path / "c.jsonl", text))

    def test_malformed_line_names_line_number(self, tmp_path):
        text = '{"pmid": "1"}\nnot json\n'
        with pytest.raises(DataError, match="line 2"):
            parse_corpus(_write(tmp_path / "c.jsonl", text))

    def test_missing_fields_default(self, tmp_path):
        docs = parse_corpus(_write(tmp_path / "c.jsonl", '{"pmid": "1"}\n'))
        assert docs[0].year == 0
        assert docs[0].abstract == ""
        assert docs[0].authors == ()

    def test_bad_year(self, tmp_path):
        with pytest.raises(DataError, match="line 1"):
            parse_corpus(_write(tmp_path / "c.jsonl", '{"pmid": "1", "year": 5}\n'))

    def test_record_order_preserved(self, tmp_path):
        text = '{"pmid": "3"}\n{"pmid": "1"}\n{"pmid": "2"}\n'
        docs = parse_corpus(_write(tmp_path / "c.jsonl", text))
        assert [d.pmid for d in docs] == ["3", "1", "2"]

    def test_roundtrip(self, tmp_path):
        text = '{"pmid": "1", "title": "T", "year": 2001}\n{"pmid": "2"}\n'
        docs = parse_corpus(_write(tmp_path / "c.jsonl", text))
        out = tmp_path / "out.jsonl"
        write_corpus(docs, out)
        assert parse_corpus(out) == docs


TOPIC_TEXT = """Topic: CD000001
Title: Statins for adults
Query:
  #1 statin*[tiab]
  #2 #1 AND lipid
Pids:
  101
  102
  103

Topic: CD000002
Title: MRI screening
Query:
  mri AND breast
Pids:
  201
"""


class TestParseTopics:
    def test_basic(self, tmp_path):
        topics = parse_topics(_write(tmp_path / "t.txt", TOPIC_TEXT))
        assert [t.id for t in topics] == ["CD000001", "CD000002"]
        assert topics[0].candidate_pmids == ("101", "102", "103")
        assert topics[0].title == "Statins for adults"
        assert "#1 statin*[tiab]" in topics[0].boolean_query_raw

    def test_empty_pids_is_error(self, tmp_path):
        text = "Topic: CD1\nTitle: x\nQuery:\n  q\nPids:\n"
        with pytest.raises(DataError, match="CD1.*Pids"):
            parse_topics(_write(tmp_path / "t.txt", text))

    def test_missing_title(self, tmp_path):
        text = "Topic: CD1\nQuery:\n  q\nPids:\n  1\n"
        with pytest.raises(DataError, match="CD1.*Title"):
            parse_topics(_write(tmp_path / "t.txt", text))

    def test_missing_query(self, tmp_path):
        text = "Topic: CD1\nTitle: x\nPids:\n  1\n"
        with pytest.raises(DataError, match="CD1.*Query"):
            parse_topics(_write(tmp_path / "t.txt", text))

    def test_duplicate_topic_id(self, tmp_path):
        block = "Topic: CD1\nTitle: x\nQuery:\n  q\nPids:\n  1\n"
        with pytest.raises(DataError, match="duplicate topic id"):
            parse_topics(_write(tmp_path / "t.txt", block + "\n" + block))

    def test_duplicate_pids_deduplicated(self, tmp_path):
        text = "Topic: CD1\nTitle: x\nQuery:\n  q\nPids:\n  5\n  3\n  5\n"
        topics = parse_topics(_write(tmp_path / "t.txt", text))
        assert topics[0].candidate_pmids == ("5", "3")


class TestQrels:
    def test_lookup(self, tmp_path):
        qrels = parse_qrels(_write(tmp_path / "q.txt", "CD1 0 555 1\nCD1 0 556 0\n"))
        assert qrels.relevance("CD1", "555") == 1
        assert qrels.relevance("CD1", "556") == 0

    def test_unjudged_is_irrelevant(self, tmp_path):
        qrels = parse_qrels(_write(tmp_path / "q.txt", "CD1 0 555 1\n"))
        assert qrels.relevance("CD1", "999") == 0
        assert qrels.relevance("CD9", "555") == 0

    def test_bad_relevance(self, tmp_path):
        with pytest.raises(DataError, match="line 1"):
            parse_qrels(_write(tmp_path / "q.txt", "CD1 0 555 2\n"))

    def test_num_relevant(self, tmp_path):
        qrels = parse_qrels(_write(tmp_path / "q.txt", "CD1 0 1 1\nCD1 0 2 1\nCD1 0 3 0\n"))
        assert qrels.num_relevant("CD1") == 2
        assert qrels.relevant_pmids("CD1") == {"1", "2"}

    def test_roundtrip_identical_set(self, tmp_path):
        src = _write(tmp_path / "q.txt", "CD2 0 9 1\nCD1 0 10 0\nCD1 0 2 1\n")
        qrels = parse_qrels(src)
        out = tmp_path / "out.txt"
        write_qrels(qrels, out)
        assert parse_qrels(out) == qrels

    def test_write_read_write_byte_identical(self, tmp_path):
        src = _write(tmp_path / "q.txt", "CD2 0 9 1\nCD1 0 10 0\nCD1 0 2 1\n")
        first, second = tmp_path / "1.txt", tmp_path / "2.txt"
        write_qrels(parse_qrels(src), first)
        write_qrels(parse_qrels(first), second)
        assert first.read_bytes() == second.read_bytes()


class TestDomainInvariants:
    def test_document_needs_pmid(self):
        with pytest.raises(ValueError):
            Document(pmid="")

    def test_document_year_range(self):
        with pytest.raises(ValueError):
            Document(pmid="1", year=1600)
        Document(pmid="1", year=0)
        Document(pmid="1", year=2100)

    def test_topic_needs_candidates(self):
        with pytest.raises(ValueError):
            Topic("CD1", "t", "q", ())

    def test_qrelset_only_binary(self):
        qrels = QrelSet({("a", "b"): 1})
        assert qrels.relevance("a", "b") == 1
