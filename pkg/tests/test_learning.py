"""End-to-end learning runs on synthetic corpora; deselect with -m "not slow"."""

import pytest

from modules.eval_module import compare, evaluate
from modules.model_module import ModelConfig
from modules.synth_module import SynthConfig, generate, split
from modules.train_module import TrainConfig, train

pytestmark = pytest.mark.slow

ARMS = ("span+gcn", "span", "token-baseline")


@pytest.fixture(scope="module")
def splits():
    # vocab 50, backbone 5-12, p_disfluent 0.7, weights 0.7/0.15/0.15, reparandum <= 3
    corpus = generate(SynthConfig(num_sentences=3000, seed=0))
    return split(corpus, (2 / 3, 1 / 6, 1 / 6), seed=0)


@pytest.fixture(scope="module")
def reports(splits):
    train_set, dev, test = splits
    model_config = ModelConfig(d_e=32, d=32, d_len=8, max_span_len=6)
    results = {}
    for arm in ARMS:
        config = TrainConfig(arm=arm, epochs=30, batch_size=32, learning_rate=1e-3, max_span_len=6, seed=0)
        params = train(train_set, config, model_config, dev=dev).params
        results[arm] = evaluate(params, test, arm)
    return results


def test_corpus_splits_into_2000_500_500(splits):
    assert [len(part) for part in splits] == [2000, 500, 500]


def test_span_gcn_arm_learns_disfluencies(reports):
    assert reports["span+gcn"].f1 >= 0.90


def test_token_baseline_finds_disfluent_tokens(reports):
    assert reports["token-baseline"].tp > 0


def test_comparison_table_renders_all_arms(reports):
    text = compare([reports[arm] for arm in ARMS]).to_text()
    for arm in ARMS:
        assert arm in text
