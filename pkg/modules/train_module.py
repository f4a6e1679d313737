# modules/train_module.py
# This module trains SpanGate models.
# It holds the training configuration, the class-weighted cross-entropy over
# enumerated spans (or over tokens for the baseline head), an Adam optimiser,
# the seeded mini-batch training loop with best-dev-F1 model selection, a
# central-difference gradient check of the hand-derived backward pass, and the
# versioned checkpoint container.

import json
import logging
import zipfile
from dataclasses import asdict, dataclass, replace

import numpy as np
from tqdm import tqdm

from modules.corpus_module import TokenLabel
from modules.eval_module import evaluate
from modules.model_module import (
    CLASS_I,
    CLASS_O,
    INIT_SCHEMES,
    PARAMETER_NAMES,
    ModelConfig,
    ModelParameters,
    Vocabulary,
    backward,
    forward,
    init_parameters,
    log_softmax,
    resolve_arm,
)
from modules.spans_module import assign_gold, overlong_gold_runs
from utils.errors import (
    CheckpointError,
    CheckpointVersionError,
    ConfigError,
    CorpusError,
    ShapeError,
    TrainingError,
)
from utils.helpers import write_jsonl

logger = logging.getLogger(__name__)

FINETUNE_LEARNING_RATE = 5e-5
FINETUNE_BATCH_SIZE = 32
FINETUNE_LENGTH_EMBEDDING_DIM = 300

# About 40 candidate spans per sentence face fewer than one gold run; w_I = 5
# lowers the effective p_I threshold of the greedy decoder to 1/6.
DEFAULT_CLASS_WEIGHT_I = 5.0


# --- Configuration ---

@dataclass(frozen=True)
class TrainConfig:
    """
    Optimisation settings.

    The desk default learning rate (1e-3) suits embeddings trained from
    scratch; `finetune_preset()` gives the fine-tuning setting (5e-5) for runs
    on precomputed transformer features.
    """

    arm: str = "span+gcn"
    batch_size: int = 32
    learning_rate: float = 1e-3
    epochs: int = 30
    max_span_len: int = 6
    seed: int = 0
    use_gcn: bool = None  # token baseline only; None leaves the graph branch off
    class_weight_I: float = DEFAULT_CLASS_WEIGHT_I
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    init_scheme: str = "scaled"
    init_range: float = 0.1  # "uniform" scheme only

    @classmethod
    def finetune_preset(cls, **overrides):
        values = {"batch_size": FINETUNE_BATCH_SIZE, "learning_rate": FINETUNE_LEARNING_RATE}
        values.update(overrides)
        return cls(**values)

    @property
    def objective(self):
        return resolve_arm(self.arm, self)[0]

    @property
    def effective_use_gcn(self):
        return resolve_arm(self.arm, self)[1]

    def validate(self):
        resolve_arm(self.arm, self)
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.max_span_len < 1:
            raise ConfigError(f"max_span_len must be >= 1, got {self.max_span_len}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if not self.class_weight_I > 0:
            raise ConfigError(f"class_weight_I must be > 0, got {self.class_weight_I}")
        if self.init_scheme not in INIT_SCHEMES:
            raise ConfigError(f"init_scheme must be one of {INIT_SCHEMES}, got {self.init_scheme!r}")
        return self


def finetune_model_config(d):
    """Model sizes of the published setting, for a d-dimensional precomputed encoder."""
    return ModelConfig(d=d, d_len=FINETUNE_LENGTH_EMBEDDING_DIM, encoder="precomputed")


# --- Loss ---

def weighted_nll(logits, gold, class_weight_I=1.0):
    """
    Summed class-weighted negative log-likelihood and its gradient.

    Args:
        logits (ndarray): N×2 logits, columns (I, O).
        gold (sequence of TokenLabel): Gold class per row.
        class_weight_I (float): Weight of rows whose gold class is I.

    Returns:
        tuple: (loss summed over rows, dLoss/dlogits).
    """
    gold_index = np.array([CLASS_I if g is TokenLabel.I else CLASS_O for g in gold], dtype=np.int64)
    weights = np.where(gold_index == CLASS_I, class_weight_I, 1.0)
    log_probs = log_softmax(logits)
    rows = np.arange(len(gold_index))
    loss = -float(np.sum(weights * log_probs[rows, gold_index]))
    dlogits = np.exp(log_probs)
    dlogits[rows, gold_index] -= 1.0
    return loss, dlogits * weights[:, None]


def span_loss(candidates, gold, class_weight_I=1.0):
    """
    Mean of -w_class * log P(gold class) over scored candidates.

    Args:
        candidates (sequence of SpanCandidate): Scored spans.
        gold (sequence of TokenLabel): Gold class of each candidate.
        class_weight_I (float): w_I; w_O is 1.

    Returns:
        float: The mean loss (0.0 for an empty list).
    """
    if not candidates:
        return 0.0
    tiny = np.finfo(np.float64).tiny  # log(0) guard
    total = 0.0
    for candidate, label in zip(candidates, gold):
        if label is TokenLabel.I:
            total -= class_weight_I * np.log(max(candidate.p_I, tiny))
        else:
            total -= np.log(max(candidate.p_O, tiny))
    return float(total / len(candidates))


def sentence_gold(cache, sentence):
    if cache.objective == "span":
        return assign_gold(cache.spans, sentence.labels)
    return list(sentence.labels)


def sentence_loss(params, sentence, config, features=None):
    """Forward-only (loss sum, item count) of one sentence."""
    objective, use_gcn = resolve_arm(config.arm, config)
    cache = forward(sentence, params, objective, use_gcn=use_gcn, L=config.max_span_len, features=features)
    loss, _ = weighted_nll(cache.logits, sentence_gold(cache, sentence), config.class_weight_I)
    return loss, cache.logits.shape[0]


def sentence_loss_and_gradients(params, sentence, config, features=None):
    """
    Loss sum, item count and summed gradients of one sentence.

    Returns:
        tuple: (loss sum, number of scored items, dict of gradients of the sum).
    """
    objective, use_gcn = resolve_arm(config.arm, config)
    cache = forward(sentence, params, objective, use_gcn=use_gcn, L=config.max_span_len, features=features)
    loss, dlogits = weighted_nll(cache.logits, sentence_gold(cache, sentence), config.class_weight_I)
    return loss, cache.logits.shape[0], backward(cache, dlogits, params)


# --- Optimiser ---

class AdamOptimizer:
    """Adam with bias correction; updates ModelParameters arrays in place."""

    def __init__(self, params, learning_rate, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(params[name]) for name in PARAMETER_NAMES}
        self.v = {name: np.zeros_like(params[name]) for name in PARAMETER_NAMES}

    def step(self, grads):
        self.step_count += 1
        correction1 = 1.0 - self.beta1 ** self.step_count
        correction2 = 1.0 - self.beta2 ** self.step_count
        for name in PARAMETER_NAMES:
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / correction1
            v_hat = self.v[name] / correction2
            self.params.tensors[name] -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


# --- Training loop ---

@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    dev_p: float
    dev_r: float
    dev_f1: float

    def to_record(self):
        return asdict(self)


@dataclass
class TrainResult:
    params: ModelParameters
    metrics: list
    best_epoch: int = 0
    overlong_gold: int = 0


def _block(features, index):
    return None if features is None else features.get(index)


def train(corpus, config, model_config=None, dev=None, features=None, dev_features=None, show_progress=False):
    """
    Trains one arm with seeded mini-batch Adam and keeps the best-dev-F1 parameters.

    Args:
        corpus (list of AnnotatedSentence): Preprocessed training sentences.
        config (TrainConfig): Optimisation settings.
        model_config (ModelConfig, optional): Sizes; max_span_len and use_gcn
            are taken from `config`.
        dev (list of AnnotatedSentence, optional): Selection corpus; the
            training corpus is used when absent.
        features, dev_features (dict, optional): Feature blocks for the precomputed encoder.
        show_progress (bool): Draw a tqdm bar per epoch.

    Returns:
        TrainResult: Best parameters, per-epoch metrics, best epoch (0 = untrained)
        and the number of gold runs longer than max_span_len.

    Raises:
        CorpusError: On an empty corpus.
        TrainingError: When a batch loss or the parameters become non-finite.
    """
    config.validate()
    if not corpus:
        raise CorpusError("training corpus is empty")
    objective, use_gcn = resolve_arm(config.arm, config)
    if objective == "span" and config.use_gcn is not None and config.use_gcn != use_gcn:
        logger.warning(
            "use_gcn=%s ignored: arm %s always runs %s the graph branch",
            config.use_gcn, config.arm, "with" if use_gcn else "without",
        )
    model_config = replace(
        model_config or ModelConfig(), max_span_len=config.max_span_len, use_gcn=use_gcn
    ).validate()
    if dev is None:
        logger.warning("No dev corpus given; selecting the best epoch on the training corpus")
        dev, dev_features = corpus, features

    params = init_parameters(
        model_config, Vocabulary.from_corpus(corpus),
        seed=config.seed, init_range=config.init_range, scheme=config.init_scheme,
    )
    params.arm = config.arm
    optimizer = AdamOptimizer(params, config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps)
    rng = np.random.default_rng(config.seed)

    overlong = 0
    if objective == "span":
        overlong = sum(len(overlong_gold_runs(sentence.labels, config.max_span_len)) for sentence in corpus)
        if overlong:
            logger.warning(
                "%d gold span(s) exceed max span length %d and can never be predicted",
                overlong, config.max_span_len,
            )

    best = params.copy()
    best_f1 = -1.0  # so epoch 1 is kept even at F1 0
    best_epoch = 0
    metrics = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(corpus))  # reshuffled every epoch
        epoch_loss = 0.0
        epoch_items = 0
        batches = range(0, len(corpus), config.batch_size)
        for batch_no, start in enumerate(
            tqdm(batches, desc=f"epoch {epoch}", disable=not show_progress, leave=False), 1
        ):
            batch_loss = 0.0
            batch_items = 0
            batch_grads = {name: np.zeros_like(params[name]) for name in PARAMETER_NAMES}
            for index in order[start : start + config.batch_size]:
                loss, items, grads = sentence_loss_and_gradients(
                    params, corpus[index], config, features=_block(features, int(index))
                )
                batch_loss += loss
                batch_items += items
                for name in PARAMETER_NAMES:
                    batch_grads[name] += grads[name]
            if not np.isfinite(batch_loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {batch_no}")
            # gradient of the mean over scored items
            optimizer.step({name: g / batch_items for name, g in batch_grads.items()})
            if not all(np.all(np.isfinite(params[name])) for name in PARAMETER_NAMES):
                raise TrainingError(f"non-finite parameters after epoch {epoch}, batch {batch_no}")
            epoch_loss += batch_loss
            epoch_items += batch_items

        report = evaluate(params, dev, config.arm, features=dev_features)
        row = EpochMetrics(epoch, epoch_loss / epoch_items, report.precision, report.recall, report.f1)
        metrics.append(row)
        logger.info(
            "epoch %d  loss %.5f  dev P %.4f R %.4f F1 %.4f",
            epoch, row.train_loss, row.dev_p, row.dev_r, row.dev_f1,
        )
        if report.f1 > best_f1:  # ties keep the earlier epoch
            best_f1 = report.f1
            best_epoch = epoch
            best = params.copy()

    if metrics:
        logger.info("Best dev F1 %.4f at epoch %d", best_f1, best_epoch)
    return TrainResult(params=best, metrics=metrics, best_epoch=best_epoch, overlong_gold=overlong)


def write_metrics(path, metrics):
    """One JSON line per epoch: epoch, train_loss, dev_p, dev_r, dev_f1."""
    write_jsonl(path, (row.to_record() for row in metrics))


# --- Gradient check ---

def gradient_check(params, sentence, config, features=None, h=1e-5, loss_and_gradients=None):
    """
    Compares analytic gradients of the mean loss against central differences.

    Every coordinate of every parameter tensor is perturbed by ±h. Coordinates
    where both gradients are exactly zero are skipped.

    Args:
        params (ModelParameters): Small float64 model (d <= 8, T <= 6).
        sentence (AnnotatedSentence): Sentence to differentiate on.
        config (TrainConfig): Arm, max span length and class weight.
        features (ndarray, optional): Feature block for the precomputed encoder.
        h (float): Finite-difference step.
        loss_and_gradients (callable, optional): Replaces
            `sentence_loss_and_gradients` for the analytic side.

    Returns:
        float: max |g_a - g_n| / max(1e-8, |g_a| + |g_n|).
    """
    analytic_fn = loss_and_gradients or sentence_loss_and_gradients
    _, items, grads = analytic_fn(params, sentence, config, features)
    shifted = params.copy()

    def mean_loss():
        loss, count = sentence_loss(shifted, sentence, config, features)
        return loss / count

    worst = 0.0
    for name in PARAMETER_NAMES:
        array = shifted.tensors[name]
        analytic = grads[name] / items
        for idx in np.ndindex(array.shape):
            original = array[idx]
            array[idx] = original + h
            loss_plus = mean_loss()
            array[idx] = original - h
            loss_minus = mean_loss()
            array[idx] = original
            numeric = (loss_plus - loss_minus) / (2 * h)
            g_a = float(analytic[idx])
            if g_a == 0.0 and numeric == 0.0:
                continue
            error = abs(g_a - numeric) / max(1e-8, abs(g_a) + abs(numeric))
            if error > worst:
                worst = error
                logger.debug("gradient check: %s%s analytic %.3e numeric %.3e", name, idx, g_a, numeric)
    return worst


# --- Checkpoints ---

CHECKPOINT_FORMAT = "spangate-checkpoint"
CHECKPOINT_VERSION = 1
META_KEY = "__meta__"
_ZIP_MAGIC = b"PK\x03\x04"
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)  # fixed member timestamps keep files byte-identical


def _write_member(archive, name, array):
    info = zipfile.ZipInfo(f"{name}.npy", date_time=_ZIP_DATE)
    info.compress_type = zipfile.ZIP_STORED
    with archive.open(info, "w", force_zip64=True) as member:
        np.lib.format.write_array(member, np.asarray(array), allow_pickle=False)


def save_checkpoint(params, path):
    """
    Writes config, vocabulary and every tensor to an .npz-compatible container.

    Tensors are stored as raw float64 .npy members, so a load reproduces them
    bit for bit.
    """
    params.check_shapes()
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": asdict(params.config),
        "vocab": list(params.vocab.itos),
        "arm": params.arm,
        "shapes": {name: list(params[name].shape) for name in PARAMETER_NAMES},
    }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as archive:
        _write_member(archive, META_KEY, np.array(json.dumps(meta, sort_keys=True)))
        for name in PARAMETER_NAMES:
            _write_member(archive, name, params[name])
    logger.debug("Saved checkpoint to %s", path)


def load_checkpoint(path):
    """
    Reads a checkpoint written by `save_checkpoint`.

    Returns:
        ModelParameters: Parameters, config, vocabulary and training arm.

    Raises:
        CheckpointVersionError: Unrecognised header, foreign format or other version.
        CheckpointError: Missing, truncated or inconsistent file.
    """
    try:
        with open(path, "rb") as handle:
            magic = handle.read(len(_ZIP_MAGIC))
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}") from None
    if magic != _ZIP_MAGIC:
        raise CheckpointVersionError(f"{path}: unrecognised checkpoint header")

    try:
        with np.load(path, allow_pickle=False) as archive:
            if META_KEY not in archive.files:
                raise CheckpointVersionError(f"{path}: no checkpoint header")
            meta = json.loads(archive[META_KEY].item())
            if meta.get("format") != CHECKPOINT_FORMAT or meta.get("version") != CHECKPOINT_VERSION:
                raise CheckpointVersionError(
                    f"{path}: unsupported checkpoint {meta.get('format')!r} version {meta.get('version')!r}"
                    f" (expected version {CHECKPOINT_VERSION})"
                )
            tensors = {}
            for name in PARAMETER_NAMES:
                if name not in archive.files:
                    raise CheckpointError(f"{path}: missing tensor {name}")
                tensors[name] = np.array(archive[name], dtype=np.float64)
    except CheckpointError:
        raise
    except (zipfile.BadZipFile, ValueError, OSError, EOFError, KeyError) as e:
        raise CheckpointError(f"{path}: truncated or corrupt checkpoint ({e})") from None

    try:
        params = ModelParameters(
            config=ModelConfig(**meta["config"]).validate(),
            vocab=Vocabulary(meta["vocab"]),
            tensors=tensors,
            arm=meta.get("arm"),
        )
        params.check_shapes()
    except (TypeError, KeyError, ConfigError, ShapeError) as e:
        raise CheckpointError(f"{path}: inconsistent checkpoint ({e})") from None
    return params
