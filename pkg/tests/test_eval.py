import json

import pytest

from modules.corpus_module import TokenLabel, io_tags_to_spans
from modules.eval_module import (
    ComparisonTable,
    EvalReport,
    compare,
    evaluate,
    precision_recall_f1,
    predict_sentence,
    report_table,
    span_prf,
    token_prf,
)
from modules.model_module import CLASS_I, CLASS_O
from utils.errors import EvaluationError

I, O = TokenLabel.I, TokenLabel.O


def _report(arm, tp, fp, fn):
    return EvalReport.from_counts(arm, tp, fp, fn, n_sentences=1, n_tokens=tp + fp + fn)


# --- counting ---

def test_token_prf_counts():
    assert token_prf([I, I, O, O], [I, O, I, O]) == (1, 1, 1)


def test_token_prf_partial_recall_example():
    counts = token_prf([O, I, O, O], [O, I, I, O])
    assert counts == (1, 0, 1)
    p, r, f1 = precision_recall_f1(*counts)
    assert (p, r) == (1.0, 0.5)
    assert f1 == pytest.approx(2 / 3)


def test_token_prf_length_mismatch():
    with pytest.raises(EvaluationError):
        token_prf([I], [I, O])


def test_precision_recall_f1_conventions():
    assert precision_recall_f1(0, 0, 0) == (0.0, 0.0, 0.0)
    assert precision_recall_f1(0, 0, 3) == (0.0, 0.0, 0.0)
    p, r, f1 = precision_recall_f1(3, 1, 2)
    assert (p, r) == (0.75, 0.6)
    assert f1 == pytest.approx(2 * 0.75 * 0.6 / 1.35)


def test_span_prf_counts_exact_matches_only():
    assert span_prf([(1, 2), (4, 4)], [(1, 2), (4, 5)]) == (1, 1, 1)


# --- reports ---

def test_report_dict_has_every_field():
    report = _report("span+gcn", 3, 1, 2)
    document = report.to_dict()
    assert list(document) == [
        "arm", "precision", "recall", "f1", "tp", "fp", "fn", "n_sentences", "n_tokens", "scoring",
    ]
    assert EvalReport.from_dict(json.loads(json.dumps(document))) == report


def test_report_from_dict_rejects_other_documents():
    with pytest.raises(EvaluationError):
        EvalReport.from_dict({"arm": "span"})


def test_evaluate_counts_tokens(tiny_corpus, make_params):
    params = make_params(tiny_corpus)
    report = evaluate(params, tiny_corpus, "span+gcn")
    gold_i = sum(sentence.labels.count(I) for sentence in tiny_corpus)
    assert report.tp + report.fn == gold_i
    assert report.n_sentences == len(tiny_corpus)
    assert report.n_tokens == sum(len(sentence) for sentence in tiny_corpus)
    assert report.scoring == "token"


def test_evaluate_span_exact(tiny_corpus, make_params):
    params = make_params(tiny_corpus)
    report = evaluate(params, tiny_corpus, "span", span_exact=True)
    gold_runs = sum(len(io_tags_to_spans(sentence.labels)) for sentence in tiny_corpus)
    assert report.tp + report.fn == gold_runs
    assert report.scoring == "span"


def test_evaluate_is_deterministic(tiny_corpus, make_params):
    params = make_params(tiny_corpus)
    assert evaluate(params, tiny_corpus, "token-baseline") == evaluate(params, tiny_corpus, "token-baseline")


def test_evaluate_warns_on_arm_mismatch(tiny_corpus, make_params, caplog):
    params = make_params(tiny_corpus)
    params.arm = "span"
    with caplog.at_level("WARNING"):
        evaluate(params, tiny_corpus[:2], "span+gcn")
    assert "trained as span" in caplog.text


def test_unconfident_model_predicts_nothing(flight_sentence, make_params):
    params = make_params([flight_sentence])
    params.tensors["Y"][CLASS_I] = 0.0
    params.tensors["Y"][CLASS_O] = 0.0
    prediction = predict_sentence(params, flight_sentence, "span+gcn")
    assert prediction.spans == []
    assert prediction.labels == [O] * 5


def test_token_baseline_prediction_reads_runs(flight_sentence, make_params):
    params = make_params([flight_sentence])
    params.tensors["B"][:] = 0.0
    params.tensors["b_B"][CLASS_I] = 1.0
    params.tensors["b_B"][CLASS_O] = 0.0
    prediction = predict_sentence(params, flight_sentence, "token-baseline")
    assert prediction.labels == [I] * 5
    assert prediction.spans == [(1, 5)]


# --- comparison tables ---

def test_compare_flags_best_f1():
    table = compare([_report("span+gcn", 9, 1, 1), _report("span", 8, 2, 2), _report("token-baseline", 5, 5, 5)])
    assert [row.best for row in table.rows] == [True, False, False]
    text = table.to_text()
    assert text.splitlines()[0].split() == ["Model", "P", "R", "F1"]
    assert "span+gcn *" in text
    assert "90.0" in text


def test_compare_ties_flag_every_best_row():
    table = compare([_report("a", 1, 1, 1), _report("b", 1, 1, 1)])
    assert all(row.best for row in table.rows)


def test_compare_needs_two_reports():
    with pytest.raises(EvaluationError):
        compare([_report("span", 1, 0, 0)])


def test_report_table_accepts_one_report():
    table = report_table([_report("span", 1, 0, 0)])
    assert table.rows[0].best


def test_table_json_round_trip():
    table = compare([_report("span", 2, 1, 0), _report("token-baseline", 1, 1, 1)])
    document = json.loads(table.to_json())
    assert document["columns"] == ["arm", "precision", "recall", "f1", "best"]
    assert ComparisonTable.from_json(table.to_json()) == table
    with pytest.raises(EvaluationError):
        ComparisonTable.from_json("{}")
