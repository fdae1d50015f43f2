import math

import pytest
from hypothesis import given, strategies as st

from tarrank.corpus import Document, Topic, TokenizerConfig, tokenize
from tarrank.embeddings import (
    EmbeddingStore,
    EmbeddingVector,
    MockEmbeddingProvider,
    StoreEmbeddingProvider,
    doc_sentences,
    fnv1a64,
    load_embeddings,
    mock_embed,
    parse_sentence_scores,
    save_embeddings,
    score_sentences,
    split_sentences,
)
from tarrank.errors import DataError
from tarrank.index import cosine_similarity


class TestSplitSentences:
    def test_empty(self):
        assert split_sentences("") == []

    def test_two_sentences(self):
        assert split_sentences("A result. Another result.") == ["A result", "Another result"]

    def test_abbreviation_missplit_accepted(self):
        # 'E.' is a one-token fragment and is dropped; the rule is applied as
        # stated, abbreviation damage included.
        assert split_sentences("E. coli grows fast.") == ["coli grows fast"]

    def test_question_and_bang(self):
        assert split_sentences("Does aspirin work? Aspirin works!") == [
            "Does aspirin work", "Aspirin works",
        ]

    def test_punct_without_whitespace_not_split(self):
        assert split_sentences("Version 1.5 shipped today") == ["Version 1.5 shipped today"]

    def test_short_fragments_dropped(self):
        assert split_sentences("Yes. The aspirin group improved.") == [
            "The aspirin group improved",
        ]

    @given(
        st.lists(st.sampled_from(["aspirin", "heart", "statin", "lung"]), min_size=2, max_size=4),
        st.lists(st.sampled_from(["trial", "dose", "rate", "muscle"]), min_size=2, max_size=4),
    )
    def test_join_property(self, left, right):
        a, b = " ".join(left), " ".join(right)
        assert split_sentences(a + ". " + b) == [a, b]


class TestMockEmbed:
    def test_fnv1a64_reference_values(self):
        # Standard FNV-1a 64-bit test vectors.
        assert fnv1a64("") == 0xCBF29CE484222325
        assert fnv1a64("a") == 0xAF63DC4C8601EC8C
        assert fnv1a64("foobar") == 0x85944171F73967E8

    def test_same_text_similarity_one(self):
        u = mock_embed("statin lipid trial", 64)
        v = mock_embed("statin lipid trial", 64)
        assert u == v
        assert cosine_similarity(u.values, v.values) == pytest.approx(1.0, abs=1e-6)

    def test_disjoint_texts_orthogonal(self):
        u = mock_embed("statin lipid", 4096)
        v = mock_embed("warfarin stroke", 4096)
        assert cosine_similarity(u.values, v.values) == pytest.approx(0.0, abs=1e-9)

    def test_all_stopwords_zero_vector(self):
        vec = mock_embed("the of and", 32)
        assert all(v == 0.0 for v in vec.values)

    @given(st.text(max_size=60), st.integers(min_value=1, max_value=128))
    def test_norm_zero_or_one(self, text, dim):
        vec = mock_embed(text, dim)
        norm = math.sqrt(sum(v * v for v in vec.values))
        assert abs(norm) < 1e-6 or abs(norm - 1.0) < 1e-6

    def test_dim_validation(self):
        with pytest.raises(ValueError):
            mock_embed("x", 0)


class TestScoreSentences:
    def _topic(self):
        return Topic("T1", "aspirin headache", "", ("1",))

    def test_no_sentences(self):
        doc = Document(pmid="1", title="", abstract="")
        scores = score_sentences(self._topic(), doc, MockEmbeddingProvider(64), "aspirin headach")
        assert scores.scores == ()

    def test_identical_sentence_scores_one(self):
        doc = Document(pmid="1", title="aspirin headache", abstract="Unrelated noise words here.")
        provider = MockEmbeddingProvider(256)
        scores = score_sentences(self._topic(), doc, provider, "aspirin headache")
        assert scores.scores[0] == pytest.approx(1.0, abs=1e-6)

    def test_matches_bruteforce_recomputation(self):
        doc = Document(
            pmid="1",
            title="aspirin headache relief",
            abstract="The aspirin group improved. Placebo lagged behind clearly.",
        )
        provider = MockEmbeddingProvider(128)
        query_text = "aspirin headach relief"
        got = score_sentences(self._topic(), doc, provider, query_text)

        # independent recomputation: tokenize -> hash counts -> cosine
        def brute_vec(text):
            counts = {}
            for token in tokenize(text, TokenizerConfig()):
                counts[fnv1a64(token) % 128] = counts.get(fnv1a64(token) % 128, 0) + 1
            return counts

        def brute_cos(u, v):
            dot = sum(w * v.get(i, 0) for i, w in u.items())
            nu = math.sqrt(sum(w * w for w in u.values()))
            nv = math.sqrt(sum(w * w for w in v.values()))
            return 0.0 if nu == 0 or nv == 0 else dot / (nu * nv)

        q = brute_vec(query_text)
        sentences = doc_sentences(doc)
        assert len(got.scores) == len(sentences)
        for score, sentence in zip(got.scores, sentences):
            assert abs(score - brute_cos(q, brute_vec(sentence))) < 1e-6

    def test_store_provider_missing_key(self):
        store = EmbeddingStore(4, {"q:T1": EmbeddingVector((1.0, 0.0, 0.0, 0.0))})
        provider = StoreEmbeddingProvider(store)
        doc = Document(pmid="9", title="aspirin headache works")
        with pytest.raises(DataError, match="s:9:0"):
            score_sentences(self._topic(), doc, provider, "x")


class TestEmbeddingStoreFile:
    def test_roundtrip_bit_exact(self, tmp_path):
        store = EmbeddingStore(4)
        store.add("q:CD1", mock_embed("statin lipid", 4))
        store.add("s:9:0", mock_embed("heart rate", 4))
        store.add("s:9:1", EmbeddingVector((0.1, -2.75, 3.0e-5, 1.0)))
        path = tmp_path / "e.emb"
        save_embeddings(store, path)
        loaded = load_embeddings(path)
        assert loaded == store
        second = tmp_path / "e2.emb"
        save_embeddings(loaded, second)
        assert path.read_bytes() == second.read_bytes()

    def test_empty_store(self, tmp_path):
        path = tmp_path / "e.emb"
        save_embeddings(EmbeddingStore(8), path)
        assert path.read_text() == "EMB1 8\n"
        assert load_embeddings(path).dim == 8

    def test_dim_mismatch_names_key(self, tmp_path):
        path = tmp_path / "e.emb"
        path.write_text("EMB1 4\ns:1:0 0.5 0.5 0.5\n")
        with pytest.raises(DataError, match="s:1:0"):
            load_embeddings(path)

    def test_duplicate_key(self, tmp_path):
        path = tmp_path / "e.emb"
        path.write_text("EMB1 2\nk 1.0 0.0\nk 0.0 1.0\n")
        with pytest.raises(DataError, match="duplicate"):
            load_embeddings(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "e.emb"
        path.write_text("EMBX 4\n")
        with pytest.raises(DataError, match="header"):
            load_embeddings(path)

    def test_non_finite_rejected(self, tmp_path):
        path = tmp_path / "e.emb"
        path.write_text("EMB1 2\nk nan 0.0\n")
        with pytest.raises(DataError):
            load_embeddings(path)


class TestSentenceScoresFile:
    def test_parse(self, tmp_path):
        path = tmp_path / "s.txt"
        path.write_text("CD1 9 0 0.5\nCD1 9 1 0.25\nCD2 7 0 -0.125\n")
        table = parse_sentence_scores(path)
        assert table[("CD1", "9")] == [0.5, 0.25]
        assert table[("CD2", "7")] == [-0.125]

    def test_gap_rejected(self, tmp_path):
        path = tmp_path / "s.txt"
        path.write_text("CD1 9 0 0.5\nCD1 9 2 0.25\n")
        with pytest.raises(DataError, match="contiguous"):
            parse_sentence_scores(path)

    def test_duplicate_rejected(self, tmp_path):
        path = tmp_path / "s.txt"
        path.write_text("CD1 9 0 0.5\nCD1 9 0 0.25\n")
        with pytest.raises(DataError, match="duplicate"):
            parse_sentence_scores(path)
