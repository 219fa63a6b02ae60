import random

import pytest
import torch

from headgen.config import Config
from headgen.corpus import Pair, TrainExample, build_vocabulary, make_batch
from headgen import retrieval


def tiny_config(**overrides):
    base = dict(batch_size=4, embed_dim=16, hidden_size=12, latent_dim=8,
                hops=2, doc_limit=50, proto_limit=12, target_limit=12,
                min_len=1, max_len=10, vocab_cap=500, seed=7)
    base.update(overrides)
    return Config(**base)


def synthetic_pairs(n_attractive=9, n_unattractive=3, doc_len=15, seed=0):
    """Deterministic topical corpus; attractive headlines carry a '!' marker."""
    words = [f"w{i:02d}" for i in range(30)]
    pairs = []
    for i in range(n_attractive + n_unattractive):
        attractive = i < n_attractive
        doc = [words[(3 * i + j) % 30] for j in range(doc_len)]
        head = [words[(3 * i + j) % 30] for j in range(6)]
        if attractive:
            head = head + ["really", "!"]
        pairs.append(Pair(f"p{i:02d}", doc, head,
                          comment_count=50 if attractive else 3))
    return pairs


def linked_examples(pairs, index, rng=None):
    """TrainExamples with resolved retrieval links for the attractive pairs."""
    rng = rng or random.Random(0)
    examples = []
    for pair in pairs:
        if not pair.attractive:
            continue
        proto = retrieval.retrieve_prototype(pair, index)
        similar = retrieval.retrieve_similar_document(proto, index)
        ya, yn, xq = retrieval.sample_negatives(index, rng,
                                                exclude_id=proto.id)
        examples.append(TrainExample(pair, proto, similar, xq,
                                     ya.headline, yn.headline))
    return examples


@pytest.fixture
def corpus_pairs():
    return synthetic_pairs()


@pytest.fixture
def corpus_index(corpus_pairs):
    return retrieval.build_index(corpus_pairs)


@pytest.fixture
def corpus_vocab(corpus_pairs):
    return build_vocabulary(corpus_pairs, 500)


@pytest.fixture
def small_batch(corpus_pairs, corpus_index, corpus_vocab):
    cfg = tiny_config()
    examples = linked_examples(corpus_pairs, corpus_index)[:4]
    return make_batch(examples, corpus_vocab, cfg.doc_limit, cfg.proto_limit,
                      cfg.target_limit)


@pytest.fixture(autouse=True)
def _deterministic():
    torch.manual_seed(1234)
