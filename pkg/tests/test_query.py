import re

import pytest
from hypothesis import given, strategies as st

from oracles import naive_tfidf_sums
from tarrank.corpus import Document, Topic, TokenizerConfig, tokenize
from tarrank.errors import DataError
from tarrank.index import build_index
from tarrank.query import (
    AbbreviationTable,
    default_abbreviations,
    expand_query_tfidf,
    formulate_query,
    preprocess_boolean_query,
)

PLAIN = TokenizerConfig(stemmer="none")


class TestPreprocessBooleanQuery:
    def test_spec_example(self):
        tokens = preprocess_boolean_query("#1 (heart OR cardiac) AND trial*")
        assert tokens == ["heart", "cardiac", "trial"]

    def test_operators_only(self):
        assert preprocess_boolean_query("AND OR NOT") == []
        assert preprocess_boolean_query("and or not") == []

    def test_field_tags_removed(self):
        tokens = preprocess_boolean_query("statin*[tiab] OR lipid[mh]", config=PLAIN)
        assert tokens == ["statin", "lipid"]

    def test_line_number_prefix_removed(self):
        assert preprocess_boolean_query("#12 heart", config=PLAIN) == ["heart"]

    def test_abbreviation_expansion(self):
        table = AbbreviationTable({"mri": "magnetic resonance imaging"})
        assert preprocess_boolean_query("MRI", table) == ["magnet", "reson", "imag"]
        assert preprocess_boolean_query("MRI", table, PLAIN) == [
            "magnetic", "resonance", "imaging",
        ]

    def test_abbreviation_whole_token_only(self):
        table = AbbreviationTable({"mri": "magnetic resonance imaging"})
        assert preprocess_boolean_query("mristudy", table, PLAIN) == ["mristudy"]

    def test_duplicates_preserved(self):
        assert preprocess_boolean_query("heart AND heart", config=PLAIN) == ["heart", "heart"]

    @given(st.text(max_size=120))
    def test_no_operator_or_tag_remnants(self, raw):
        for token in preprocess_boolean_query(raw):
            assert not re.match(r"^(and|or|not)$", token)
            assert "[" not in token and "]" not in token


class TestFormulateQuery:
    def test_spec_example(self):
        topic = Topic("CD1", "statins", "lipid", ("1",))
        query = formulate_query(topic)
        assert [(t.token, t.provenance) for t in query.terms] == [
            ("statin", "title"), ("lipid", "boolean"),
        ]
        assert all(t.weight == 1.0 for t in query.terms)

    def test_empty_query_is_error(self):
        topic = Topic("CD1", "", "AND", ("1",))
        with pytest.raises(DataError, match="CD1"):
            formulate_query(topic)

    def test_title_first_order(self):
        topic = Topic("CD1", "heart rate muscle", "statin lipid", ("1",))
        query = formulate_query(topic, config=PLAIN)
        assert query.tokens() == ["heart", "rate", "muscle", "statin", "lipid"]
        assert len(query.terms) == 5

    def test_pure_function(self):
        topic = Topic("CD1", "statins", "lipid OR heart", ("1",))
        table = default_abbreviations()
        assert formulate_query(topic, table) == formulate_query(topic, table)


def _toy_index():
    docs = [
        Document(pmid="1", title="aspirin aspirin headache", abstract="aspirin relief"),
        Document(pmid="2", title="headache relief", abstract="aspirin dose"),
        Document(pmid="3", title="placebo dose", abstract="fever relief"),
    ]
    index = build_index(docs, ("title", "abstract"), PLAIN)
    tokens = [tokenize(d.title + " " + d.abstract, PLAIN) for d in docs]
    return docs, index, tokens


class TestExpandQueryTfidf:
    def test_top1_matches_bruteforce(self):
        _, index, tokens = _toy_index()
        oracle = naive_tfidf_sums(tokens)
        assert max(oracle, key=lambda t: (oracle[t], t)) == "aspirin"
        topic = Topic("CD1", "fever", "", ("1",))
        query = formulate_query(topic, config=PLAIN)
        expanded = expand_query_tfidf(query, index, 1)
        added = expanded.terms[len(query.terms):]
        assert [t.token for t in added] == ["aspirin"]
        assert added[0].provenance == "expansion"
        assert added[0].weight == 1.0

    def test_full_order_matches_bruteforce(self):
        _, index, tokens = _toy_index()
        oracle = naive_tfidf_sums(tokens)
        topic = Topic("CD1", "fever", "", ("1",))
        query = formulate_query(topic, config=PLAIN)
        expanded = expand_query_tfidf(query, index, 100)
        added = [t.token for t in expanded.terms[len(query.terms):]]
        want = sorted((t for t in oracle if t != "fever"), key=lambda t: (-oracle[t], t))
        assert added == want

    def test_k_larger_than_vocabulary(self):
        _, index, _ = _toy_index()
        topic = Topic("CD1", "fever", "", ("1",))
        query = formulate_query(topic, config=PLAIN)
        expanded = expand_query_tfidf(query, index, 999)
        vocab = set(index.postings)
        assert set(expanded.tokens()) == vocab | {"fever"}

    def test_existing_term_skipped(self):
        _, index, _ = _toy_index()
        topic = Topic("CD1", "aspirin", "", ("1",))
        query = formulate_query(topic, config=PLAIN)
        expanded = expand_query_tfidf(query, index, 1)
        added = [t.token for t in expanded.terms[len(query.terms):]]
        assert added and added[0] != "aspirin"

    def test_k_zero_disallowed(self):
        _, index, _ = _toy_index()
        query = formulate_query(Topic("CD1", "fever", "", ("1",)), config=PLAIN)
        with pytest.raises(ValueError):
            expand_query_tfidf(query, index, 0)

    def test_existing_terms_untouched(self):
        _, index, _ = _toy_index()
        query = formulate_query(Topic("CD1", "fever dose", "", ("1",)), config=PLAIN)
        expanded = expand_query_tfidf(query, index, 3)
        assert expanded.terms[: len(query.terms)] == query.terms
        assert len(expanded.terms) <= len(query.terms) + 3


class TestAbbreviationTable:
    def test_from_file(self, tmp_path):
        path = tmp_path / "abbrev.txt"
        path.write_text("MRI\tmagnetic resonance imaging\nct\tcomputed tomography\n")
        table = AbbreviationTable.from_file(path)
        assert table.expand("mri") == "magnetic resonance imaging"
        assert table.expand("MRI") == "magnetic resonance imaging"

    def test_duplicate_key(self, tmp_path):
        path = tmp_path / "abbrev.txt"
        path.write_text("mri\ta\nMRI\tb\n")
        with pytest.raises(DataError, match="duplicate"):
            AbbreviationTable.from_file(path)

    def test_bad_line(self, tmp_path):
        path = tmp_path / "abbrev.txt"
        path.write_text("mri no tab here\n")
        with pytest.raises(DataError, match="line 1"):
            AbbreviationTable.from_file(path)

    def test_default_table_loads(self):
        table = default_abbreviations()
        assert table.expand("mri") == "magnetic resonance imaging"
