# utils/helpers.py
# This module contains utility functions shared across SpanGate.
# These include logging setup, JSON / JSON Lines readers and writers used by
# every file format in the toolkit, and the flat run configuration that the
# command-line entry point loads from a JSON document and overrides with flags.

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from utils.errors import ConfigError, CorpusError

logger = logging.getLogger(__name__)

# ---------------------------------------------------
# Logging
# ---------------------------------------------------
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def configure_logging(verbosity=0):
    """
    Installs a single stderr handler on the root logger.

    Args:
        verbosity (int): -1 quiet (WARNING), 0 normal (INFO), 1+ verbose (DEBUG).
    """
    if verbosity < 0:
        level = logging.WARNING
    elif verbosity == 0:
        level = logging.INFO
    else:
        level = logging.DEBUG
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler()  # stderr; outputs never carry log text
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(level)


# ---------------------------------------------------
# JSON & JSON Lines I/O
# ---------------------------------------------------
def read_json(path):
    """
    Reads one JSON document.

    Args:
        path (str or Path): File to read.

    Returns:
        object: The decoded document.

    Raises:
        CorpusError: If the file is missing or is not valid JSON.
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError:
        raise CorpusError(f"file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise CorpusError(f"{path}: invalid JSON ({e.msg} at line {e.lineno})") from None


def write_json(path, document):
    """Writes one JSON document with stable key order and a trailing newline."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(document, handle, ensure_ascii=False, indent=2)
        handle.write("\n")


def iter_jsonl(path):
    """
    Yields (line_number, record) pairs from a JSON Lines file, skipping blank lines.

    Args:
        path (str or Path): File to read.

    Yields:
        tuple: (1-based line number, decoded object).

    Raises:
        CorpusError: On a missing file or a line that is not valid JSON.
    """
    try:
        handle = open(path, "r", encoding="utf-8")
    except FileNotFoundError:
        raise CorpusError(f"file not found: {path}") from None
    with handle:
        for line_no, line in enumerate(handle, 1):
            if not line.strip():
                continue
            try:
                yield line_no, json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusError(f"{path}:{line_no}: malformed JSON line ({e.msg})") from None


def write_jsonl(path, records):
    """Writes an iterable of JSON-serialisable objects, one per line."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False))
            handle.write("\n")


# ---------------------------------------------------
# Run configuration
# ---------------------------------------------------
@dataclass
class RunConfig:
    """
    Flat union of every tunable used by the command-line entry point.

    Values come from three layers: dataclass defaults, then a JSON config
    document, then command-line flags. Module-level configs are cut out of it
    with `section()`.
    """

    seed: int = 0

    # Synthetic corpus
    num_sentences: int = 3000
    vocab_size: int = 50
    len_min: int = 5
    len_max: int = 12
    p_disfluent: float = 0.7
    type_weights: tuple = (0.7, 0.15, 0.15)
    max_reparandum_len: int = 3
    split_ratios: tuple = (0.8, 0.1, 0.1)

    # Model (max_span_len unset: 6 for training, the checkpoint's for inference)
    # use_gcn unset: the arm decides
    d_e: int = 32
    d: int = 32
    d_len: int = 8
    max_span_len: int = None
    use_gcn: bool = None
    directed_arcs: bool = False
    encoder: str = "desk"

    # Training (arm unset: span+gcn for training, the checkpoint's for inference)
    arm: str = None
    batch_size: int = 32
    learning_rate: float = 1e-3
    epochs: int = 30
    class_weight_I: float = 5.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    init_scheme: str = "scaled"
    init_range: float = 0.1

    # Files and switches
    corpus: str = None
    dev_corpus: str = None
    conllu: str = None
    labels: str = None
    model: str = None
    compare_model: str = None
    features: str = None
    dev_features: str = None
    compare_arm: str = None
    out: str = None
    split: bool = False
    preprocess: bool = False
    span_exact: bool = False
    compare: list = field(default_factory=list)
    indices: list = field(default_factory=list)

    _TUPLE_KEYS = ("type_weights", "split_ratios")
    _SEQUENCE_TYPES = (tuple, list)

    @classmethod
    def known_keys(cls):
        return {f.name for f in dataclasses.fields(cls)}

    @classmethod
    def from_json(cls, path):
        """
        Builds a RunConfig from a JSON document.

        Raises:
            ConfigError: If the document is not an object or names unknown keys.
        """
        document = read_json(path)
        if not isinstance(document, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls().with_overrides(document, source=str(path))

    def with_overrides(self, overrides, source="command line"):
        """
        Returns a copy with `overrides` applied; None values are ignored.

        Raises:
            ConfigError: On any key RunConfig does not define.
        """
        unknown = sorted(set(overrides) - self.known_keys())
        if unknown:
            raise ConfigError(f"unknown config key(s) from {source}: {', '.join(unknown)}")
        types = {f.name: f.type for f in dataclasses.fields(self)}
        values = {}
        for key, value in overrides.items():
            if value is None:
                continue
            values[key] = self._coerce(key, value, types[key], source)
        return dataclasses.replace(self, **values)

    def _coerce(self, key, value, expected, source):
        if expected in self._SEQUENCE_TYPES:
            if not isinstance(value, self._SEQUENCE_TYPES):
                raise ConfigError(f"{key} from {source} must be a list, got {value!r}")
            return tuple(value) if key in self._TUPLE_KEYS else list(value)
        if expected is float and isinstance(value, int) and not isinstance(value, bool):
            return float(value)
        if not isinstance(value, expected) or (expected is int and isinstance(value, bool)):
            raise ConfigError(f"{key} from {source} must be {expected.__name__}, got {value!r}")
        return value

    def section(self, config_cls):
        """
        Cuts a module config out of the run config.

        Every field of `config_cls` that RunConfig also defines and has set
        (not None) is copied over; the rest keep the module config's defaults.
        """
        names = {f.name for f in dataclasses.fields(config_cls)} & self.known_keys()
        values = {name: getattr(self, name) for name in sorted(names)}
        return config_cls(**{name: value for name, value in values.items() if value is not None})
