# modules/inspect_module.py
# This module renders sentences for qualitative review.
# For each requested sentence it prints the tokens with the gold disfluent
# spans bracketed, the same tokens with a model's predicted spans bracketed
# and each predicted span's p_I, and optionally a second model (or a second
# arm of the same model) underneath for side-by-side comparison.

import logging
from dataclasses import dataclass

from modules.corpus_module import io_tags_to_spans
from modules.eval_module import predict_sentence
from utils.errors import CorpusError

logger = logging.getLogger(__name__)

OPEN, CLOSE = "[", "]"


@dataclass(frozen=True)
class InspectTarget:
    """One model/arm pair whose predictions get a row per sentence."""

    name: str
    params: object
    arm: str
    features: dict = None


def bracket_tokens(tokens, spans):
    """
    Joins tokens with spaces, wrapping each (start, end) span in brackets.

    Args:
        tokens (sequence of str): Sentence tokens.
        spans (iterable of tuple): Non-overlapping 1-indexed inclusive spans.

    Returns:
        str: e.g. "i [want a] want a flight".
    """
    starts = {start for start, _ in spans}
    ends = {end for _, end in spans}
    words = []
    for t, token in enumerate(tokens, 1):
        word = token
        if t in starts:
            word = OPEN + word
        if t in ends:
            word = word + CLOSE
        words.append(word)
    return " ".join(words)


def span_scores(prediction):
    """
    p_I of every predicted span, in span order.

    Span arms report the decoded candidate's own p_I; the token baseline has
    no span score, so the mean token P_I over the run stands in for it.
    """
    if prediction.candidates is not None:
        by_span = {candidate.as_tuple(): candidate.p_I for candidate in prediction.candidates}
        return [(span, by_span[span]) for span in prediction.spans]
    scores = []
    for start, end in prediction.spans:
        run = prediction.token_probabilities[start - 1 : end]
        scores.append(((start, end), sum(p_i for p_i, _ in run) / len(run)))
    return scores


def _format_scores(scores):
    if not scores:
        return "(no spans)"
    return "  ".join(f"{start}-{end}:{p_i:.3f}" for (start, end), p_i in scores)


def render_sentence(index, sentence, predictions):
    """
    Lines for one sentence: a gold row, then one row per target.

    Args:
        index (int): Sentence index within the corpus.
        sentence (AnnotatedSentence): Gold sentence.
        predictions (list of tuple): (target name, SentencePrediction) pairs.

    Returns:
        list of str: Text lines without trailing newlines.
    """
    gold = [run.as_tuple() for run in io_tags_to_spans(sentence.labels)]
    width = max([len("gold")] + [len(name) for name, _ in predictions])
    lines = [f"#{index}", f"  {'gold'.ljust(width)}  {bracket_tokens(sentence.tokens, gold)}"]
    for name, prediction in predictions:
        lines.append(f"  {name.ljust(width)}  {bracket_tokens(sentence.tokens, prediction.spans)}")
        lines.append(f"  {''.ljust(width)}  p_I {_format_scores(span_scores(prediction))}")
    return lines


def inspect_sentences(corpus, indices, targets):
    """
    Renders the chosen sentences of a corpus for every target.

    Args:
        corpus (list of AnnotatedSentence): Gold corpus.
        indices (list of int): 0-based sentence indices; empty means all.
        targets (list of InspectTarget): Models to show, first is the primary.

    Returns:
        str: The rendered text, sentences separated by blank lines.

    Raises:
        CorpusError: On an index outside the corpus.
    """
    indices = list(indices) or list(range(len(corpus)))
    bad = [i for i in indices if not 0 <= i < len(corpus)]
    if bad:
        raise CorpusError(f"sentence index out of range 0..{len(corpus) - 1}: {bad}")
    blocks = []
    for index in indices:
        sentence = corpus[index]
        predictions = []
        for target in targets:
            block = None if target.features is None else target.features.get(index)
            predictions.append((target.name, predict_sentence(target.params, sentence, target.arm, features=block)))
        blocks.append("\n".join(render_sentence(index, sentence, predictions)))
    logger.debug("Rendered %d sentence(s) for %d target(s)", len(indices), len(targets))
    return "\n\n".join(blocks) + "\n"
