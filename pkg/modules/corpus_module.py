# modules/corpus_module.py
# This module ingests annotated transcripts for SpanGate.
# It defines the sentence record (tokens, IO labels, dependency heads), loads and
# writes the canonical JSON Lines corpus, imports CoNLL-U parses with a parallel
# label file, applies transcript preprocessing (lower-casing, punctuation and
# partial-word removal), and converts between token labels and gold spans.

import logging
import unicodedata
from dataclasses import dataclass, replace
from enum import Enum

import conllu
from conllu.exceptions import ParseException

from utils.errors import CorpusError, EmptySentenceError, SpanOverlapError
from utils.helpers import iter_jsonl, write_jsonl

logger = logging.getLogger(__name__)

RECORD_KEYS = ("tokens", "labels", "heads", "deprels")
REQUIRED_KEYS = ("tokens", "labels", "heads")


# --- Domain Types ---

class TokenLabel(str, Enum):
    """IO tag of one token: I marks reparandum tokens, O fluent ones."""

    I = "I"
    O = "O"

    @classmethod
    def parse(cls, value):
        try:
            return cls(value)
        except ValueError:
            raise CorpusError(f"label must be 'I' or 'O', got {value!r}") from None


@dataclass(frozen=True)
class GoldSpan:
    """Inclusive 1-indexed token range."""

    start: int
    end: int

    @property
    def length(self):
        return self.end - self.start + 1

    def as_tuple(self):
        return (self.start, self.end)


@dataclass(frozen=True)
class AnnotatedSentence:
    """
    One utterance: tokens, per-token IO labels and dependency heads.

    Heads are 1-indexed positions of each token's governor, 0 for a root.
    Several roots (a forest) are allowed; cycles are not.
    """

    tokens: tuple
    labels: tuple
    heads: tuple
    deprels: tuple = None

    def __len__(self):
        return len(self.tokens)

    def to_record(self):
        """Returns the canonical JSON Lines record for this sentence."""
        record = {
            "tokens": list(self.tokens),
            "labels": [label.value for label in self.labels],
            "heads": list(self.heads),
        }
        if self.deprels is not None:
            record["deprels"] = list(self.deprels)
        return record


def make_sentence(tokens, labels, heads, deprels=None):
    """Builds and validates an AnnotatedSentence from plain sequences."""
    sentence = AnnotatedSentence(
        tokens=tuple(tokens),
        labels=tuple(TokenLabel.parse(label) for label in labels),
        heads=tuple(int(h) for h in heads),
        deprels=None if deprels is None else tuple(deprels),
    )
    validate_sentence(sentence)
    return sentence


# --- Validation ---

def find_head_cycle(heads):
    """
    Looks for a cycle in a head sequence.

    Args:
        heads (sequence of int): 1-indexed heads, 0 for roots.

    Returns:
        list or None: Token indices on the first cycle found, or None.
    """
    T = len(heads)
    state = [0] * (T + 1)  # 0 unseen, 1 on current path, 2 reaches a root
    for t in range(1, T + 1):
        path = []
        node = t
        while node != 0 and state[node] == 0:
            state[node] = 1
            path.append(node)
            node = heads[node - 1]
        if node != 0 and state[node] == 1:
            return path[path.index(node):]
        for visited in path:
            state[visited] = 2
    return None


def validate_sentence(sentence, index=None):
    """
    Checks the AnnotatedSentence invariants.

    Args:
        sentence (AnnotatedSentence): Sentence to check.
        index (int, optional): Position in the corpus, used in messages.

    Raises:
        CorpusError: Naming the offending field (and sentence index when given).
    """
    where = "" if index is None else f"sentence {index}: "
    T = len(sentence.tokens)
    if T < 1:
        raise CorpusError(f"{where}tokens must be non-empty")
    if len(sentence.labels) != T:
        raise CorpusError(f"{where}labels has {len(sentence.labels)} entries for {T} tokens")
    if len(sentence.heads) != T:
        raise CorpusError(f"{where}heads has {len(sentence.heads)} entries for {T} tokens")
    if sentence.deprels is not None and len(sentence.deprels) != T:
        raise CorpusError(f"{where}deprels has {len(sentence.deprels)} entries for {T} tokens")
    for t, token in enumerate(sentence.tokens, 1):
        if not isinstance(token, str):
            raise CorpusError(f"{where}tokens[{t}] is not a string")
    for t, deprel in enumerate(sentence.deprels or (), 1):
        if not isinstance(deprel, str):
            raise CorpusError(f"{where}deprels[{t}] is not a string")
    for t, label in enumerate(sentence.labels, 1):
        if not isinstance(label, TokenLabel):
            raise CorpusError(f"{where}labels[{t}] is not I or O")
    for t, head in enumerate(sentence.heads, 1):
        if not 0 <= head <= T:
            raise CorpusError(f"{where}heads[{t}] = {head} outside 0..{T}")
        if head == t:
            raise CorpusError(f"{where}heads[{t}]: head equals own index")
    cycle = find_head_cycle(sentence.heads)
    if cycle:
        raise CorpusError(f"{where}heads contain a cycle through tokens {cycle}")


# --- Loading & writing ---

def _sentence_from_record(record, where):
    if not isinstance(record, dict):
        raise CorpusError(f"{where}: record must be a JSON object")
    missing = [key for key in REQUIRED_KEYS if key not in record]
    if missing:
        raise CorpusError(f"{where}: missing key(s) {', '.join(missing)}")
    unknown = sorted(set(record) - set(RECORD_KEYS))
    if unknown:
        raise CorpusError(f"{where}: unknown key(s) {', '.join(unknown)}")
    for key in RECORD_KEYS:
        if key in record and not isinstance(record[key], list):
            raise CorpusError(f"{where}: {key} must be a list")
    try:
        labels = tuple(TokenLabel.parse(label) for label in record["labels"])
        heads = tuple(record["heads"])
        if not all(isinstance(h, int) and not isinstance(h, bool) for h in heads):
            raise CorpusError("heads must be integers")
    except CorpusError as e:
        raise CorpusError(f"{where}: {e}") from None
    deprels = record.get("deprels")
    return AnnotatedSentence(
        tokens=tuple(record["tokens"]),
        labels=labels,
        heads=heads,
        deprels=None if deprels is None else tuple(deprels),
    )


def load_jsonl(path):
    """
    Loads a canonical JSON Lines corpus.

    Records are validated but otherwise untouched (no preprocessing).

    Args:
        path (str or Path): Corpus file.

    Returns:
        list of AnnotatedSentence: Sentences in file order.

    Raises:
        CorpusError: On a malformed line (with its line number) or an invariant
                     violation (naming the field and sentence index).
    """
    sentences = []
    for line_no, record in iter_jsonl(path):
        index = len(sentences)
        sentence = _sentence_from_record(record, f"{path}:{line_no}: sentence {index}")
        try:
            validate_sentence(sentence, index)
        except CorpusError as e:
            raise CorpusError(f"{path}:{line_no}: {e}") from None
        sentences.append(sentence)
    logger.debug("Loaded %d sentences from %s", len(sentences), path)
    return sentences


def write_corpus(path, sentences):
    """Writes sentences as canonical JSON Lines records."""
    write_jsonl(path, (sentence.to_record() for sentence in sentences))


# --- CoNLL-U import ---

def _read_label_lines(labels_path):
    try:
        with open(labels_path, "r", encoding="utf-8") as handle:
            return [line.split() for line in handle if line.strip()]
    except FileNotFoundError:
        raise CorpusError(f"file not found: {labels_path}") from None


def import_conllu(conllu_path, labels_path):
    """
    Builds sentences from a CoNLL-U parse file and a parallel IO label file.

    FORM becomes the token, HEAD the head and DEPREL the relation. Multiword
    range lines ("1-2") and empty nodes ("3.1") are skipped. The label file
    holds one space-separated I/O sequence per sentence; blank lines are
    ignored.

    Args:
        conllu_path (str or Path): CoNLL-U file.
        labels_path (str or Path): Parallel label file.

    Returns:
        list of AnnotatedSentence: Validated sentences in file order.

    Raises:
        CorpusError: On sentence-count or token-count mismatch (with sentence index).
    """
    label_lines = _read_label_lines(labels_path)
    sentences = []
    try:
        handle = open(conllu_path, "r", encoding="utf-8")
    except FileNotFoundError:
        raise CorpusError(f"file not found: {conllu_path}") from None
    with handle:
        try:
            for index, token_list in enumerate(conllu.parse_incr(handle)):
                # Range and empty-node ids parse to tuples; plain words to int
                words = [token for token in token_list if isinstance(token["id"], int)]
                if index >= len(label_lines):
                    raise CorpusError(
                        f"sentence {index}: {labels_path} has only {len(label_lines)} label lines"
                    )
                labels = label_lines[index]
                if len(labels) != len(words):
                    raise CorpusError(
                        f"sentence {index}: {len(labels)} labels for {len(words)} tokens"
                    )
                try:
                    parsed = tuple(TokenLabel.parse(label) for label in labels)
                except CorpusError as e:
                    raise CorpusError(f"sentence {index}: {e}") from None
                heads = []
                for word in words:
                    if not isinstance(word["head"], int):
                        raise CorpusError(f"sentence {index}: token {word['id']} has no HEAD")
                    heads.append(word["head"])
                sentence = AnnotatedSentence(
                    tokens=tuple(word["form"] for word in words),
                    labels=parsed,
                    heads=tuple(heads),
                    deprels=tuple(word["deprel"] or "_" for word in words),
                )
                validate_sentence(sentence, index)
                sentences.append(sentence)
        except ParseException as e:
            raise CorpusError(f"{conllu_path}: {e}") from None
    if len(sentences) != len(label_lines):
        raise CorpusError(
            f"{conllu_path} has {len(sentences)} sentences but {labels_path} has {len(label_lines)} label lines"
        )
    logger.debug("Imported %d sentences from %s", len(sentences), conllu_path)
    return sentences


# --- Preprocessing ---

def _strip_punctuation(token):
    return "".join(ch for ch in token if not unicodedata.category(ch).startswith("P"))


def preprocess(sentence):
    """
    Lower-cases tokens, strips punctuation and removes partial words.

    A partial word is a token ending in "-". Tokens that are partial or become
    empty are deleted with their labels; every dependent of a deleted token is
    re-attached to the deleted token's own head (climbing until a kept token or
    the root is reached) and heads are re-indexed.

    Args:
        sentence (AnnotatedSentence): A valid sentence.

    Returns:
        AnnotatedSentence: The preprocessed sentence.

    Raises:
        EmptySentenceError: If every token is deleted.
    """
    T = len(sentence)
    cleaned = []
    keep = []
    for token in sentence.tokens:
        lowered = token.lower()
        stripped = _strip_punctuation(lowered)
        cleaned.append(stripped)
        keep.append(bool(stripped) and not lowered.endswith("-"))  # partial words end in "-"

    if not any(keep):
        raise EmptySentenceError("empty after preprocessing")

    new_index = [0] * (T + 1)  # 0 stays the root
    position = 0
    for t in range(1, T + 1):
        if keep[t - 1]:
            position += 1
            new_index[t] = position

    heads = []
    for t in range(1, T + 1):
        if not keep[t - 1]:
            continue
        head = sentence.heads[t - 1]
        while head != 0 and not keep[head - 1]:  # climb past deleted heads
            head = sentence.heads[head - 1]
        heads.append(new_index[head])

    kept = [t for t in range(T) if keep[t]]
    return replace(
        sentence,
        tokens=tuple(cleaned[t] for t in kept),
        labels=tuple(sentence.labels[t] for t in kept),
        heads=tuple(heads),
        deprels=None if sentence.deprels is None else tuple(sentence.deprels[t] for t in kept),
    )


def preprocess_corpus(sentences):
    """
    Preprocesses every sentence and drops the ones that end up empty.

    Returns:
        tuple: (list of kept AnnotatedSentence, number dropped).
    """
    kept = []
    dropped = 0
    for sentence in sentences:
        try:
            kept.append(preprocess(sentence))
        except EmptySentenceError:
            dropped += 1
    if dropped:
        logger.info("Preprocessing dropped %d empty sentence(s)", dropped)
    return kept, dropped


# --- Labels <-> spans ---

def io_tags_to_spans(labels):
    """
    Returns the maximal contiguous runs of I tokens as gold spans, sorted by start.

    Args:
        labels (sequence of TokenLabel): Per-token labels.

    Returns:
        list of GoldSpan: 1-indexed inclusive runs.
    """
    spans = []
    start = None
    for t, label in enumerate(labels, 1):
        if label is TokenLabel.I:
            if start is None:
                start = t
        elif start is not None:
            spans.append(GoldSpan(start, t - 1))
            start = None
    if start is not None:
        spans.append(GoldSpan(start, len(labels)))
    return spans


def spans_to_io(spans, T):
    """
    Marks tokens covered by a span as I and every other token as O.

    Args:
        spans (iterable): GoldSpan objects or (start, end) pairs, 1-indexed inclusive.
        T (int): Sentence length.

    Returns:
        list of TokenLabel: Length-T label sequence.

    Raises:
        CorpusError: If a span falls outside 1..T.
        SpanOverlapError: If two spans share a token.
    """
    labels = [TokenLabel.O] * T
    for span in spans:
        start, end = span.as_tuple() if isinstance(span, GoldSpan) else span
        if not 1 <= start <= end <= T:
            raise CorpusError(f"span ({start}, {end}) outside 1..{T}")
        for t in range(start, end + 1):
            if labels[t - 1] is TokenLabel.I:
                raise SpanOverlapError(f"span ({start}, {end}) overlaps another span at token {t}")
            labels[t - 1] = TokenLabel.I
    return labels
