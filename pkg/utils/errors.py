# utils/errors.py
# Exception hierarchy shared by every SpanGate module, plus the mapping from
# exception type to command-line exit status used by spangate_cli.py.


class SpanGateError(Exception):
    """Base class for every error SpanGate raises on purpose."""

    exit_code = 3


# --- Usage & configuration ---

class UsageError(SpanGateError):
    """Bad command-line usage (unknown flag, missing required path, ...)."""

    exit_code = 1


class ConfigError(UsageError):
    """Unknown configuration key or a value outside its allowed range."""


# --- Data ---

class CorpusError(SpanGateError):
    """A corpus record or label file is malformed or violates an invariant."""

    exit_code = 2


class EmptySentenceError(CorpusError):
    """Preprocessing removed every token of a sentence; callers drop it."""


class SpanOverlapError(CorpusError):
    """Two spans that must be disjoint share at least one token."""


class GoldSpanTooLongError(CorpusError):
    """A gold run is longer than the maximum enumerated span length."""


class CheckpointError(SpanGateError):
    """Checkpoint or feature sidecar cannot be read."""

    exit_code = 2


class CheckpointVersionError(CheckpointError):
    """Unrecognised container header or unsupported format version."""


class ShapeError(SpanGateError):
    """Tensor shapes disagree with the model configuration."""

    exit_code = 2


# --- Runtime ---

class TrainingError(SpanGateError):
    """Training diverged (non-finite loss or parameters)."""

    exit_code = 3


class EvaluationError(SpanGateError):
    """Metric preconditions do not hold."""

    exit_code = 3


def exit_code_for(error):
    """
    Maps an exception to the CLI exit status.

    Args:
        error (BaseException): The exception that ended the run.

    Returns:
        int: 1 usage error, 2 data error, 3 runtime error.
    """
    if isinstance(error, SpanGateError):
        return error.exit_code
    return 3
