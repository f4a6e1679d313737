# conftest.py
# Shared pytest fixtures: small hand-built sentences, seeded synthetic corpora
# and tiny float64 models small enough for exhaustive gradient checks.

import pytest

from modules.corpus_module import make_sentence
from modules.model_module import ModelConfig, Vocabulary, init_parameters
from modules.synth_module import SynthConfig, generate


@pytest.fixture
def flight_sentence():
    """'i i want a flight' with the first 'i' as the reparandum."""
    return make_sentence(
        ["i", "i", "want", "a", "flight"],
        ["I", "O", "O", "O", "O"],
        [2, 3, 0, 5, 3],
    )


@pytest.fixture
def six_token_sentence():
    # T=6 with a two-token repetition attached to its fluent copy
    return make_sentence(
        ["a", "b", "a", "b", "c", "d"],
        ["I", "I", "O", "O", "O", "O"],
        [3, 1, 0, 3, 4, 5],
    )


@pytest.fixture
def tiny_synth_config():
    return SynthConfig(num_sentences=40, vocab_size=8, len_min=3, len_max=5, seed=7)


@pytest.fixture
def tiny_corpus(tiny_synth_config):
    return generate(tiny_synth_config)


@pytest.fixture
def tiny_model_config():
    return ModelConfig(d_e=4, d=4, d_len=2, max_span_len=3, use_gcn=True)


@pytest.fixture
def make_params(tiny_model_config):
    """Factory for tiny models over the vocabulary of the given sentences."""

    def factory(sentences, config=None, seed=0, init_range=0.5, scheme="uniform"):
        vocab = Vocabulary.from_corpus(sentences)
        return init_parameters(config or tiny_model_config, vocab, seed=seed, init_range=init_range, scheme=scheme)

    return factory
