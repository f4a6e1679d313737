# modules/eval_module.py
# This module scores SpanGate predictions.
# It counts token-level true/false positives for the disfluent class (the
# headline edit-word metric), optionally scores exact span matches, runs a
# model over a corpus to build a report, and lays several reports side by side
# in a comparison table with the best F1 flagged.

import json
import logging
from dataclasses import asdict, dataclass

from modules.corpus_module import TokenLabel, io_tags_to_spans
from modules.model_module import model_forward, resolve_arm, token_baseline_forward
from modules.spans_module import decode, decoded_to_labels
from utils.errors import EvaluationError

logger = logging.getLogger(__name__)

REPORT_FIELDS = ("arm", "precision", "recall", "f1", "tp", "fp", "fn", "n_sentences", "n_tokens", "scoring")


# --- Counting ---

def precision_recall_f1(tp, fp, fn):
    """P, R and F1 with the 0-when-undefined convention."""
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def token_prf(pred, gold):
    """
    Token-level counts for the I class.

    Args:
        pred (sequence of TokenLabel): Predicted labels.
        gold (sequence of TokenLabel): Gold labels.

    Returns:
        tuple: (tp, fp, fn).

    Raises:
        EvaluationError: If the sequences differ in length.
    """
    if len(pred) != len(gold):
        raise EvaluationError(f"{len(pred)} predicted labels for {len(gold)} gold labels")
    tp = fp = fn = 0
    for p, g in zip(pred, gold):
        if p is TokenLabel.I and g is TokenLabel.I:
            tp += 1
        elif p is TokenLabel.I:
            fp += 1
        elif g is TokenLabel.I:
            fn += 1
    return tp, fp, fn


def span_prf(pred_spans, gold_spans):
    """Exact-match counts between two sets of (start, end) spans."""
    pred = {tuple(span) for span in pred_spans}
    gold = {tuple(span) for span in gold_spans}
    tp = len(pred & gold)
    return tp, len(pred) - tp, len(gold) - tp


# --- Reports ---

@dataclass(frozen=True)
class EvalReport:
    """Micro-averaged P/R/F1 of one arm over one corpus."""

    arm: str
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    n_sentences: int
    n_tokens: int
    scoring: str = "token"

    @classmethod
    def from_counts(cls, arm, tp, fp, fn, n_sentences, n_tokens, scoring="token"):
        precision, recall, f1 = precision_recall_f1(tp, fp, fn)
        return cls(arm, precision, recall, f1, tp, fp, fn, n_sentences, n_tokens, scoring)

    def to_dict(self):
        values = asdict(self)
        return {key: values[key] for key in REPORT_FIELDS}

    @classmethod
    def from_dict(cls, document):
        try:
            return cls(**{key: document[key] for key in REPORT_FIELDS})
        except (KeyError, TypeError) as e:
            raise EvaluationError(f"not an evaluation report: {e}") from None


@dataclass(frozen=True)
class SentencePrediction:
    """Decoded output for one sentence."""

    spans: list
    labels: list
    candidates: list = None
    token_probabilities: list = None


def predict_sentence(params, sentence, arm, features=None, L=None):
    """
    Runs one arm on one sentence.

    Span arms decode the scored candidates; the token baseline takes the
    per-token argmax (I only when P_I > P_O) and reads spans off its runs.

    Returns:
        SentencePrediction: Kept spans, token labels and the raw scores.
    """
    objective, use_gcn = resolve_arm(arm, params.config)
    T = len(sentence)
    if objective == "span":
        candidates = model_forward(sentence, params, L=L, features=features, use_gcn=use_gcn)
        kept = decode(candidates)
        return SentencePrediction(spans=kept, labels=decoded_to_labels(kept, T), candidates=candidates)
    pairs = token_baseline_forward(sentence, params, features=features, use_gcn=use_gcn)
    labels = [TokenLabel.I if p_i > p_o else TokenLabel.O for p_i, p_o in pairs]  # ties go to O
    spans = [run.as_tuple() for run in io_tags_to_spans(labels)]
    return SentencePrediction(spans=spans, labels=labels, token_probabilities=pairs)


def evaluate(params, corpus, arm, features=None, span_exact=False, L=None):
    """
    Scores one arm of a model over a corpus.

    Args:
        params (ModelParameters): Model to run.
        corpus (list of AnnotatedSentence): Preprocessed gold sentences.
        arm (str): "span+gcn", "span" or "token-baseline".
        features (dict, optional): Sentence index to feature block (precomputed encoder).
        span_exact (bool): Count exact span matches instead of tokens.
        L (int, optional): Max span length for span arms.

    Returns:
        EvalReport: Micro-aggregated counts and P/R/F1.
    """
    if params.arm and params.arm != arm:
        logger.warning("Evaluating arm %s on a model trained as %s", arm, params.arm)
    tp = fp = fn = 0
    n_tokens = 0
    for index, sentence in enumerate(corpus):
        block = None if features is None else features.get(index)
        prediction = predict_sentence(params, sentence, arm, features=block, L=L)
        if span_exact:
            gold_spans = [run.as_tuple() for run in io_tags_to_spans(sentence.labels)]
            counts = span_prf(prediction.spans, gold_spans)
        else:
            counts = token_prf(prediction.labels, sentence.labels)
        # micro-average: counts pool over the corpus
        tp += counts[0]
        fp += counts[1]
        fn += counts[2]
        n_tokens += len(sentence)
    return EvalReport.from_counts(
        arm, tp, fp, fn, len(corpus), n_tokens, scoring="span" if span_exact else "token"
    )


# --- Comparison tables ---

@dataclass(frozen=True)
class ComparisonRow:
    arm: str
    precision: float
    recall: float
    f1: float
    best: bool


@dataclass(frozen=True)
class ComparisonTable:
    """Arms × (P, R, F1), best F1 flagged (every row that ties for it)."""

    rows: tuple

    def to_dict(self):
        return {
            "columns": ["arm", "precision", "recall", "f1", "best"],
            "rows": [asdict(row) for row in self.rows],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2) + "\n"

    @classmethod
    def from_json(cls, text):
        try:
            document = json.loads(text)
            return cls(rows=tuple(ComparisonRow(**row) for row in document["rows"]))
        except (ValueError, KeyError, TypeError) as e:
            raise EvaluationError(f"not a comparison table: {e}") from None

    def to_text(self):
        header = ("Model", "P", "R", "F1")
        body = [
            (
                row.arm + (" *" if row.best else ""),
                f"{100 * row.precision:.1f}",
                f"{100 * row.recall:.1f}",
                f"{100 * row.f1:.1f}",
            )
            for row in self.rows
        ]
        widths = [max(len(line[i]) for line in [header] + body) for i in range(4)]
        lines = []
        for line in [header] + body:
            cells = [line[0].ljust(widths[0])] + [cell.rjust(width) for cell, width in zip(line[1:], widths[1:])]
            lines.append("  ".join(cells).rstrip())
        rule = "-" * len(lines[0])
        return "\n".join([lines[0], rule] + lines[1:]) + "\n"


def report_table(reports):
    """Builds a table over any number of reports."""
    best_f1 = max((report.f1 for report in reports), default=0.0)
    return ComparisonTable(
        rows=tuple(
            ComparisonRow(report.arm, report.precision, report.recall, report.f1, report.f1 == best_f1)
            for report in reports
        )
    )


def compare(reports):
    """
    Lays two or more reports side by side.

    Raises:
        EvaluationError: With fewer than two reports.
    """
    if len(reports) < 2:
        raise EvaluationError(f"compare needs at least 2 reports, got {len(reports)}")
    return report_table(reports)
