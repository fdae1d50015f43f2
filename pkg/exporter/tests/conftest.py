import os

import pytest

# Never reach for the hub: the tests run against a local tiny encoder.
os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")

_VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "aspirin", "headache", "relief", "the", "group", "improved", "effects",
    "of", "on", "outcomes", "statin", "lipid", "trial", "magnetic",
    "resonance", "imaging", "breast", "cancer", "screening", "a", "for",
    "##s", "##ing", "study", "dose", "placebo", "work", "well",
]


@pytest.fixture(scope="session")
def tiny_encoder_dir(tmp_path_factory):
    """A seeded, randomly-initialized SentenceTransformer saved to disk, so
    the exporter loads it through the same path a real checkpoint would use."""
    import torch
    from transformers import BertConfig, BertModel, BertTokenizer

    try:
        from sentence_transformers.sentence_transformer.modules import Pooling, Transformer
    except ImportError:
        from sentence_transformers.models import Pooling, Transformer
    from sentence_transformers import SentenceTransformer

    root = tmp_path_factory.mktemp("encoder")
    bert_dir = root / "bert"
    bert_dir.mkdir()
    (bert_dir / "vocab.txt").write_text("\n".join(_VOCAB) + "\n")

    torch.manual_seed(20210301)
    config = BertConfig(
        vocab_size=len(_VOCAB), hidden_size=32, num_hidden_layers=1,
        num_attention_heads=2, intermediate_size=37, max_position_embeddings=64,
    )
    BertModel(config).save_pretrained(bert_dir)
    BertTokenizer(str(bert_dir / "vocab.txt")).save_pretrained(bert_dir)

    word = Transformer(str(bert_dir), max_seq_length=32)
    try:
        dim = word.get_embedding_dimension()
    except AttributeError:
        dim = word.get_word_embedding_dimension()
    model = SentenceTransformer(modules=[word, Pooling(dim, pooling_mode="mean")])
    out = root / "st"
    model.save(str(out))
    return str(out)
