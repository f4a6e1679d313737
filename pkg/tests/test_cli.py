import json

import pytest

from spangate_cli import build_parser, run
from utils.helpers import RunConfig, iter_jsonl

TINY = {
    "num_sentences": 30,
    "vocab_size": 8,
    "len_min": 3,
    "len_max": 5,
    "d_e": 4,
    "d": 4,
    "d_len": 2,
    "max_span_len": 3,
    "epochs": 2,
    "batch_size": 8,
    "learning_rate": 0.01,
    "seed": 5,
}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(TINY), encoding="utf-8")
    return str(path)


def _pipeline(directory, config_path):
    corpus = str(directory / "corpus.jsonl")
    model = str(directory / "m.ckpt")
    report = str(directory / "report.json")
    assert run(["synth", "--config", config_path, "--out", corpus]) == 0
    assert run(["train", "--config", config_path, "--corpus", corpus, "--model", model]) == 0
    assert run(["eval", "--config", config_path, "--corpus", corpus, "--model", model, "--out", report]) == 0
    return corpus, model, report


def test_synth_train_eval_pipeline(tmp_path, config_path, capsys):
    corpus, model, report = _pipeline(tmp_path, config_path)
    assert len(list(iter_jsonl(corpus))) == 30
    metrics = [record for _, record in iter_jsonl(tmp_path / "m.metrics.jsonl")]
    assert len(metrics) == 2
    document = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert {"precision", "recall", "f1"} <= set(document)
    assert document["arm"] == "span+gcn"
    assert "span+gcn" in capsys.readouterr().out


def test_pipeline_outputs_are_byte_identical(tmp_path, config_path):
    first, second = tmp_path / "one", tmp_path / "two"
    first.mkdir()
    second.mkdir()
    _pipeline(first, config_path)
    _pipeline(second, config_path)
    for name in ("corpus.jsonl", "m.ckpt", "m.metrics.jsonl", "report.json"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_synth_split_writes_three_parts(tmp_path, config_path):
    out = tmp_path / "c.jsonl"
    assert run(["synth", "--config", config_path, "--out", str(out), "--split"]) == 0
    sizes = [len(list(iter_jsonl(tmp_path / f"c.{part}.jsonl"))) for part in ("train", "dev", "test")]
    assert sizes == [24, 3, 3]
    assert not out.exists()


def test_flags_override_config_file(tmp_path, config_path):
    out = tmp_path / "c.jsonl"
    assert run(["synth", "--config", config_path, "--out", str(out), "--num-sentences", "4"]) == 0
    assert len(list(iter_jsonl(out))) == 4


def test_train_warns_when_use_gcn_conflicts_with_span_arm(tmp_path, config_path, capsys):
    corpus = str(tmp_path / "corpus.jsonl")
    assert run(["synth", "--config", config_path, "--out", corpus]) == 0
    model = str(tmp_path / "m.ckpt")
    assert run(["train", "--config", config_path, "--corpus", corpus, "--model", model, "--no-use-gcn"]) == 0
    assert "use_gcn=False ignored: arm span+gcn" in capsys.readouterr().err


def test_predict_writes_spans_and_labels(tmp_path, config_path):
    corpus, model, _ = _pipeline(tmp_path, config_path)
    out = tmp_path / "pred.jsonl"
    assert run(["predict", "--corpus", corpus, "--model", model, "--out", str(out)]) == 0
    records = [record for _, record in iter_jsonl(out)]
    assert len(records) == 30
    first = records[0]
    assert set(first) == {"index", "tokens", "spans", "labels"}
    assert len(first["labels"]) == len(first["tokens"])
    assert set(first["labels"]) <= {"I", "O"}


def test_eval_compare_writes_table(tmp_path, config_path, capsys):
    corpus, model, report = _pipeline(tmp_path, config_path)
    second = str(tmp_path / "span.json")
    assert run(["eval", "--corpus", corpus, "--model", model, "--arm", "span", "--out", second, "--compare", report]) == 0
    table = json.loads((tmp_path / "span.compare.json").read_text(encoding="utf-8"))
    assert [row["arm"] for row in table["rows"]] == ["span", "span+gcn"]
    out = capsys.readouterr().out
    assert "Model" in out and "token" not in out


def test_eval_span_exact(tmp_path, config_path):
    corpus, model, _ = _pipeline(tmp_path, config_path)
    out = tmp_path / "exact.json"
    assert run(["eval", "--corpus", corpus, "--model", model, "--span-exact", "--out", str(out)]) == 0
    assert json.loads(out.read_text(encoding="utf-8"))["scoring"] == "span"


def test_inspect_prints_gold_and_prediction_rows(tmp_path, config_path, capsys):
    corpus, model, _ = _pipeline(tmp_path, config_path)
    capsys.readouterr()
    code = run([
        "inspect", "--corpus", corpus, "--model", model,
        "--indices", "0", "2", "--compare-arm", "token-baseline",
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "#0" in out and "#2" in out and "#1" not in out
    assert "gold" in out
    assert "span+gcn" in out and "token-baseline" in out
    assert "p_I" in out


def test_inspect_index_out_of_range(tmp_path, config_path):
    corpus, model, _ = _pipeline(tmp_path, config_path)
    assert run(["inspect", "--corpus", corpus, "--model", model, "--indices", "99"]) == 2


# --- exit codes ---

def test_unknown_flag_is_a_usage_error(capsys):
    assert run(["train", "--bogus"]) == 1
    assert capsys.readouterr().err.startswith("error:")


def test_unknown_subcommand_and_missing_subcommand():
    assert run(["serve"]) == 1
    assert run([]) == 1


def test_unknown_config_key(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"learning_rat": 0.1}), encoding="utf-8")
    assert run(["synth", "--config", str(path), "--out", str(tmp_path / "c.jsonl")]) == 1


def test_wrongly_typed_config_value(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"epochs": "many"}), encoding="utf-8")
    assert run(["synth", "--config", str(path), "--out", str(tmp_path / "c.jsonl")]) == 1


def test_missing_corpus_is_a_data_error(tmp_path, capsys):
    assert run(["train", "--corpus", str(tmp_path / "nope.jsonl"), "--model", str(tmp_path / "m.ckpt")]) == 2
    err = capsys.readouterr().err.strip()
    assert len(err.splitlines()) == 1
    assert "not found" in err


def test_bad_checkpoint_is_a_data_error(tmp_path, config_path):
    corpus = str(tmp_path / "c.jsonl")
    run(["synth", "--config", config_path, "--out", corpus])
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"garbage")
    assert run(["eval", "--corpus", corpus, "--model", str(bad), "--out", str(tmp_path / "r.json")]) == 2


def test_no_corpus_is_a_usage_error(tmp_path):
    assert run(["train", "--model", str(tmp_path / "m.ckpt")]) == 1


@pytest.mark.parametrize("command", ["synth", "train", "predict", "eval", "inspect"])
def test_help_lists_every_flag(command, capsys):
    assert run([command, "--help"]) == 0
    text = capsys.readouterr().out
    subparser = build_parser()._subparsers._group_actions[0].choices[command]
    for action in subparser._actions:
        for flag in action.option_strings:
            assert flag in text


def test_every_flag_is_a_run_config_key():
    keys = RunConfig.known_keys() | {"command", "config", "verbose", "quiet", "help"}
    for subparser in build_parser()._subparsers._group_actions[0].choices.values():
        for action in subparser._actions:
            assert action.dest in keys
