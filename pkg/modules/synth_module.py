# modules/synth_module.py
# This module generates seeded synthetic disfluent corpora so SpanGate can be
# trained and tested without licensed transcripts. A fluent backbone of
# "w0".."w{V-1}" tokens with a chain parse receives at most one reparandum per
# sentence: a repetition, a restart (fresh "r0".."r{V-1}" words) or a repair.
# Every inserted token hangs from its fluent counterpart. It also splits a
# corpus into train/dev/test parts with a seeded shuffle.

import logging
import random
from collections import Counter
from dataclasses import dataclass

from modules.corpus_module import AnnotatedSentence, TokenLabel
from utils.errors import ConfigError, CorpusError

logger = logging.getLogger(__name__)

DISFLUENCY_TYPES = ("repetition", "restart", "repair")
BACKBONE_PREFIX = "w"
RESTART_PREFIX = "r"  # restart openings draw from a vocabulary disjoint from the backbone


# --- Configuration ---

@dataclass(frozen=True)
class SynthConfig:
    """Generator settings; `type_weights` follows DISFLUENCY_TYPES order."""

    num_sentences: int = 3000
    vocab_size: int = 50
    len_min: int = 5
    len_max: int = 12
    p_disfluent: float = 0.7
    type_weights: tuple = (0.7, 0.15, 0.15)
    max_reparandum_len: int = 3
    seed: int = 0

    def validate(self):
        if self.num_sentences < 0:
            raise ConfigError(f"num_sentences must be >= 0, got {self.num_sentences}")
        if self.vocab_size < 1:
            raise ConfigError(f"vocab_size must be >= 1, got {self.vocab_size}")
        if self.len_min < 2:
            raise ConfigError(f"len_min must be >= 2, got {self.len_min}")
        if self.len_max < self.len_min:
            raise ConfigError(f"len_max ({self.len_max}) must be >= len_min ({self.len_min})")
        if not 0.0 <= self.p_disfluent <= 1.0:
            raise ConfigError(f"p_disfluent must be in [0, 1], got {self.p_disfluent}")
        if len(self.type_weights) != len(DISFLUENCY_TYPES):
            raise ConfigError(f"type_weights needs {len(DISFLUENCY_TYPES)} entries {DISFLUENCY_TYPES}")
        if any(w < 0 for w in self.type_weights) or not any(w > 0 for w in self.type_weights):
            raise ConfigError("type_weights must be non-negative and not all zero")
        if self.max_reparandum_len < 1:
            raise ConfigError(f"max_reparandum_len must be >= 1, got {self.max_reparandum_len}")
        return self


# --- Sentence construction ---

def _chain_heads(n):
    """Head of token t is t - 1; token 1 is the root."""
    return list(range(n))


def insert_reparandum(backbone, position, reparandum, attach_to):
    """
    Inserts reparandum tokens (labelled I) before 1-indexed `position`.

    The backbone keeps its chain parse, re-indexed around the insertion.
    Reparandum token i attaches to backbone token `attach_to[i]`.

    Args:
        backbone (list of str): Fluent tokens.
        position (int): Backbone position the reparandum precedes (1-indexed).
        reparandum (list of str): Tokens to insert.
        attach_to (sequence of int): Backbone head of each reparandum token (1-indexed).

    Returns:
        AnnotatedSentence: The disfluent sentence.
    """
    k = len(reparandum)
    n = len(backbone)
    if len(attach_to) != k:
        raise CorpusError(f"{len(attach_to)} attachment points for {k} reparandum tokens")

    def new_index(b):  # backbone position -> sentence position
        return b if b < position else b + k

    tokens = backbone[: position - 1] + list(reparandum) + backbone[position - 1 :]
    labels = [TokenLabel.O] * (position - 1) + [TokenLabel.I] * k + [TokenLabel.O] * (n - position + 1)
    heads = [0] * (n + k)
    for b, head in enumerate(_chain_heads(n), 1):
        heads[new_index(b) - 1] = 0 if head == 0 else new_index(head)
    for i, b in enumerate(attach_to):
        heads[position + i - 1] = new_index(b)
    return AnnotatedSentence(tokens=tuple(tokens), labels=tuple(labels), heads=tuple(heads))


def _fluent(backbone):
    return AnnotatedSentence(
        tokens=tuple(backbone),
        labels=tuple([TokenLabel.O] * len(backbone)),
        heads=tuple(_chain_heads(len(backbone))),
    )


def _random_word(rng, vocab_size, prefix=BACKBONE_PREFIX):
    return f"{prefix}{rng.randrange(vocab_size)}"


def _replacement(rng, vocab_size, word):
    if vocab_size == 1:
        return word
    while True:
        candidate = _random_word(rng, vocab_size)
        if candidate != word:
            return candidate


def _make_disfluent(rng, config, backbone, kind):
    n = len(backbone)
    if kind == "restart":
        # abandoned opening: fresh words, all hanging from the first fluent token
        k = rng.randint(1, config.max_reparandum_len)
        prefix = [_random_word(rng, config.vocab_size, RESTART_PREFIX) for _ in range(k)]
        return insert_reparandum(backbone, 1, prefix, attach_to=[1] * k)
    k = rng.randint(1, min(config.max_reparandum_len, n))
    start = rng.randint(1, n - k + 1)  # fluent copy occupies backbone start..start+k-1
    counterpart = backbone[start - 1 : start - 1 + k]
    if kind == "repetition":
        copy = list(counterpart)
    else:
        # repair: the earlier copy carries replaced material
        copy = [_replacement(rng, config.vocab_size, word) for word in counterpart]
    return insert_reparandum(backbone, start, copy, attach_to=range(start, start + k))


def generate(config):
    """
    Generates a synthetic corpus; identical configs give identical corpora.

    Args:
        config (SynthConfig): Validated generator settings.

    Returns:
        list of AnnotatedSentence: `num_sentences` sentences.
    """
    config.validate()
    rng = random.Random(config.seed)
    counts = Counter()
    corpus = []
    for _ in range(config.num_sentences):
        n = rng.randint(config.len_min, config.len_max)
        backbone = [_random_word(rng, config.vocab_size) for _ in range(n)]
        if rng.random() < config.p_disfluent:
            kind = rng.choices(DISFLUENCY_TYPES, weights=config.type_weights)[0]
            corpus.append(_make_disfluent(rng, config, backbone, kind))
            counts[kind] += 1
        else:
            corpus.append(_fluent(backbone))
            counts["fluent"] += 1
    logger.info(
        "Generated %d sentences (%s)",
        len(corpus),
        ", ".join(f"{kind} {counts[kind]}" for kind in DISFLUENCY_TYPES + ("fluent",)),
    )
    return corpus


# --- Splitting ---

def split_sizes(n, ratios):
    """
    Part sizes for n items: floors of ratio·n, remainder to the largest fractions.

    Every size is within 1 of ratio·n and the sizes sum to n.
    """
    raw = [r * n for r in ratios]
    sizes = [int(x) for x in raw]
    remainder = n - sum(sizes)
    by_fraction = sorted(range(len(ratios)), key=lambda i: (-(raw[i] - sizes[i]), i))
    for i in by_fraction[:remainder]:
        sizes[i] += 1
    return sizes


def split(corpus, ratios=(0.8, 0.1, 0.1), seed=0):
    """
    Shuffles a corpus with a seeded generator and cuts it into train/dev/test.

    Args:
        corpus (list): Sentences to split.
        ratios (tuple): Three non-negative fractions summing to 1.
        seed (int): Shuffle seed.

    Returns:
        tuple: (train, dev, test) lists forming a disjoint cover of the corpus.

    Raises:
        CorpusError: On an empty corpus.
        ConfigError: On malformed ratios.
    """
    if not corpus:
        raise CorpusError("cannot split an empty corpus")
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must be three non-negative numbers summing to 1, got {ratios}")
    order = list(range(len(corpus)))
    random.Random(seed).shuffle(order)
    n_train, n_dev, _ = split_sizes(len(corpus), ratios)
    parts = (order[:n_train], order[n_train : n_train + n_dev], order[n_train + n_dev :])
    return tuple([corpus[i] for i in part] for part in parts)
