from dataclasses import replace

import pytest

from modules.corpus_module import TokenLabel, io_tags_to_spans, validate_sentence
from modules.synth_module import (
    BACKBONE_PREFIX,
    DISFLUENCY_TYPES,
    RESTART_PREFIX,
    SynthConfig,
    generate,
    insert_reparandum,
    split,
    split_sizes,
)
from utils.errors import ConfigError, CorpusError


def _only(kind, **overrides):
    weights = {
        "repetition": (1.0, 0.0, 0.0),
        "restart": (0.0, 1.0, 0.0),
        "repair": (0.0, 0.0, 1.0),
    }[kind]
    values = dict(num_sentences=200, vocab_size=20, len_min=4, len_max=9, p_disfluent=1.0, type_weights=weights, seed=3)
    values.update(overrides)
    return SynthConfig(**values)


def _without_disfluency(sentence):
    """Drops I tokens and re-indexes the heads of the remaining ones."""
    kept = [t for t, label in enumerate(sentence.labels, 1) if label is TokenLabel.O]
    position = {t: i for i, t in enumerate(kept, 1)}
    tokens = tuple(sentence.tokens[t - 1] for t in kept)
    heads = tuple(position.get(sentence.heads[t - 1], 0) for t in kept)
    return tokens, heads


def test_generate_is_deterministic(tiny_synth_config):
    assert generate(tiny_synth_config) == generate(tiny_synth_config)


def test_generate_seed_changes_corpus(tiny_synth_config):
    assert generate(tiny_synth_config) != generate(replace(tiny_synth_config, seed=8))


def test_generated_sentences_are_valid(tiny_corpus, tiny_synth_config):
    assert len(tiny_corpus) == tiny_synth_config.num_sentences
    for index, sentence in enumerate(tiny_corpus):
        validate_sentence(sentence, index)
        assert len(io_tags_to_spans(sentence.labels)) <= 1
        for token, label in zip(sentence.tokens, sentence.labels):
            assert token[0] in (BACKBONE_PREFIX, RESTART_PREFIX)
            if label is TokenLabel.O:
                assert token.startswith(BACKBONE_PREFIX)


def test_lengths_respect_backbone_and_reparandum_bounds():
    config = _only("repetition", max_reparandum_len=2)
    for sentence in generate(config):
        n_fluent = sentence.labels.count(TokenLabel.O)
        n_disfluent = sentence.labels.count(TokenLabel.I)
        assert config.len_min <= n_fluent <= config.len_max
        assert 1 <= n_disfluent <= 2


@pytest.mark.parametrize("kind", DISFLUENCY_TYPES)
@pytest.mark.parametrize("max_len", [1, 2, 3])
def test_gold_span_never_exceeds_max_reparandum_len(kind, max_len):
    lengths = set()
    for sentence in generate(_only(kind, max_reparandum_len=max_len)):
        [run] = io_tags_to_spans(sentence.labels)
        lengths.add(run.length)
    assert lengths == set(range(1, max_len + 1))


@pytest.mark.parametrize("kind", DISFLUENCY_TYPES)
def test_removing_the_reparandum_leaves_a_fluent_backbone(kind):
    config = _only(kind)
    for sentence in generate(config):
        tokens, heads = _without_disfluency(sentence)
        assert config.len_min <= len(tokens) <= config.len_max
        assert all(token.startswith(BACKBONE_PREFIX) for token in tokens)
        assert heads == tuple(range(len(tokens)))  # chain, token 1 is root


def test_no_disfluency_when_probability_is_zero():
    corpus = generate(_only("repetition", p_disfluent=0.0))
    assert all(set(sentence.labels) == {TokenLabel.O} for sentence in corpus)
    assert all(sentence.heads == tuple(range(len(sentence))) for sentence in corpus)


def test_repetition_copies_the_following_tokens():
    for sentence in generate(_only("repetition")):
        [run] = io_tags_to_spans(sentence.labels)
        k = run.length
        reparandum = sentence.tokens[run.start - 1 : run.end]
        assert reparandum == sentence.tokens[run.end : run.end + k]
        # each reparandum token hangs from its fluent copy
        assert [sentence.heads[t - 1] for t in range(run.start, run.end + 1)] == list(
            range(run.end + 1, run.end + k + 1)
        )


def test_restart_sits_at_sentence_start():
    for sentence in generate(_only("restart")):
        [run] = io_tags_to_spans(sentence.labels)
        assert run.start == 1
        assert all(sentence.heads[t - 1] == run.end + 1 for t in range(1, run.end + 1))
        assert all(token.startswith(RESTART_PREFIX) for token in sentence.tokens[: run.end])
        assert sentence.heads[run.end] == 0


def test_repair_replaces_every_reparandum_token():
    for sentence in generate(_only("repair")):
        [run] = io_tags_to_spans(sentence.labels)
        k = run.length
        for t in range(run.start, run.end + 1):
            assert sentence.heads[t - 1] == t + k
            assert sentence.tokens[t - 1] != sentence.tokens[t + k - 1]


def test_insert_reparandum_example():
    sentence = insert_reparandum(["a", "b", "c"], 2, ["b"], attach_to=[2])
    assert sentence.tokens == ("a", "b", "b", "c")
    assert sentence.labels == (TokenLabel.O, TokenLabel.I, TokenLabel.O, TokenLabel.O)
    assert sentence.heads == (0, 3, 1, 3)


def test_insert_reparandum_attaches_each_token_to_its_counterpart():
    sentence = insert_reparandum(["a", "b", "c"], 2, ["x", "y"], attach_to=[2, 3])
    assert sentence.tokens == ("a", "x", "y", "b", "c")
    assert sentence.heads == (0, 4, 5, 1, 4)
    with pytest.raises(CorpusError):
        insert_reparandum(["a", "b"], 1, ["x", "y"], attach_to=[1])


def test_generate_logs_type_counts(caplog):
    with caplog.at_level("INFO", logger="modules.synth_module"):
        generate(_only("restart", num_sentences=10))
    assert "restart 10" in caplog.text


@pytest.mark.parametrize(
    "overrides",
    [
        {"len_min": 6, "len_max": 5},
        {"p_disfluent": 1.5},
        {"type_weights": (0.0, 0.0, 0.0)},
        {"type_weights": (1.0, 0.0)},
        {"vocab_size": 0},
        {"max_reparandum_len": 0},
        {"num_sentences": -1},
    ],
)
def test_invalid_config_is_rejected(overrides):
    with pytest.raises(ConfigError):
        generate(replace(SynthConfig(), **overrides))


# --- split ---

def test_split_sizes_sum_and_round():
    assert split_sizes(100, (0.8, 0.1, 0.1)) == [80, 10, 10]
    sizes = split_sizes(7, (0.8, 0.1, 0.1))
    assert sum(sizes) == 7
    assert all(abs(size - ratio * 7) < 1 for size, ratio in zip(sizes, (0.8, 0.1, 0.1)))


def test_split_is_a_disjoint_cover(tiny_corpus):
    train, dev, test = split(tiny_corpus, (0.5, 0.25, 0.25), seed=1)
    assert (len(train), len(dev), len(test)) == (20, 10, 10)
    assert sorted(map(id, train + dev + test)) == sorted(map(id, tiny_corpus))


def test_split_is_seeded(tiny_corpus):
    assert split(tiny_corpus, seed=4) == split(tiny_corpus, seed=4)


def test_split_errors(tiny_corpus):
    with pytest.raises(CorpusError):
        split([], (0.8, 0.1, 0.1))
    with pytest.raises(ConfigError):
        split(tiny_corpus, (0.8, 0.3, 0.1))
    with pytest.raises(ConfigError):
        split(tiny_corpus, (1.2, -0.1, -0.1))
