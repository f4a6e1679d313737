# modules/spans_module.py
# This module holds the span algebra of the span classifier: enumerating every
# candidate span up to a maximum length, assigning exact-match gold labels,
# testing overlap, and the greedy highest-probability-first decoder that turns
# scored candidates into a non-overlapping set of disfluent spans.

import logging
from dataclasses import dataclass

from modules.corpus_module import TokenLabel, io_tags_to_spans, spans_to_io
from utils.errors import GoldSpanTooLongError

logger = logging.getLogger(__name__)


# --- Domain Types ---

@dataclass(frozen=True)
class SpanCandidate:
    """
    A scored span: 1-indexed inclusive boundaries and its class probabilities.

    `predicted` is I only when p_I is strictly larger than p_O.
    """

    start: int
    end: int
    p_I: float
    p_O: float

    @property
    def length(self):
        return self.end - self.start + 1

    @property
    def predicted(self):
        return TokenLabel.I if self.p_I > self.p_O else TokenLabel.O

    def as_tuple(self):
        return (self.start, self.end)


# --- Enumeration & gold assignment ---

def enumerate_spans(T, L):
    """
    Lists every (start, end) with end - start + 1 <= L, ordered by length then start.

    Args:
        T (int): Sentence length (>= 1).
        L (int): Maximum span length (>= 1).

    Returns:
        list of tuple: 1-indexed inclusive spans; sum_{k=1..min(L,T)} (T-k+1) of them.
    """
    spans = []
    for length in range(1, min(L, T) + 1):
        for start in range(1, T - length + 2):
            spans.append((start, start + length - 1))
    return spans


def overlong_gold_runs(labels, L):
    """Returns the gold runs of `labels` that are longer than L."""
    return [run for run in io_tags_to_spans(labels) if run.length > L]


def assign_gold(spans, labels, strict=False):
    """
    Labels each span I iff it equals a maximal I-run of `labels` exactly.

    Sub-spans and super-spans of a run are O. A run longer than every
    enumerated span can never be matched; with `strict` this raises, otherwise
    the caller counts such runs with `overlong_gold_runs`.

    Args:
        spans (list of tuple): Output of enumerate_spans over len(labels).
        labels (sequence of TokenLabel): Gold token labels.
        strict (bool): Raise on a gold run longer than the longest span.

    Returns:
        list of TokenLabel: One gold class per span.

    Raises:
        GoldSpanTooLongError: In strict mode, when a gold run exceeds the max length.
    """
    runs = {run.as_tuple() for run in io_tags_to_spans(labels)}  # maximal runs only
    if strict:
        max_len = max((end - start + 1 for start, end in spans), default=0)
        too_long = [run for run in runs if run[1] - run[0] + 1 > max_len]
        if too_long:
            raise GoldSpanTooLongError(f"gold span exceeds max length {max_len}: {sorted(too_long)}")
    return [TokenLabel.I if tuple(span) in runs else TokenLabel.O for span in spans]


# --- Overlap & decoding ---

def overlaps(a, b):
    """True iff spans a and b (start, end pairs) share at least one token."""
    return max(a[0], b[0]) <= min(a[1], b[1])


def decode(candidates):
    """
    Greedy non-overlapping selection over the I-predicted candidates.

    Candidates predicted I are visited by p_I descending, ties broken by
    smaller start then shorter length; a span is kept when it overlaps no span
    kept before it. O-predicted candidates never suppress anything.

    Args:
        candidates (iterable of SpanCandidate): Scored spans of one sentence.

    Returns:
        list of tuple: Kept (start, end) spans sorted by start.
    """
    positives = [c for c in candidates if c.predicted is TokenLabel.I]  # p_I > p_O strictly
    positives.sort(key=lambda c: (-c.p_I, c.start, c.length))
    kept = []
    for candidate in positives:
        span = candidate.as_tuple()
        if not any(overlaps(span, other) for other in kept):
            kept.append(span)
    return sorted(kept)


def decoded_to_labels(kept, T):
    """Token labels for decoded spans (delegates to spans_to_io)."""
    return spans_to_io(kept, T)
