# modules/model_module.py
# This module is the differentiable core of SpanGate.
# It covers the contextual token encoder (an embedding table plus a width-3
# ReLU mixer, or precomputed features), two graph convolution layers over the
# dependency adjacency, the sigmoid gate that blends the graph encoding into the
# contextual one, span representations (boundary tokens plus a length
# embedding), span class probabilities, and the token-classification baseline
# head. Every forward step keeps what its backward step needs, and `backward`
# returns hand-derived gradients for every parameter tensor.

import logging
from dataclasses import dataclass, field

import numpy as np

from modules.graph_module import build_adjacency
from modules.spans_module import SpanCandidate, enumerate_spans
from utils.errors import CheckpointError, ConfigError, ShapeError

logger = logging.getLogger(__name__)

ENCODERS = ("desk", "precomputed")
NUM_GCN_LAYERS = 2
CLASS_I, CLASS_O = 0, 1  # column order of every logit / probability pair
PARAMETER_NAMES = (
    "E", "W_c", "b_c",
    "W_gcn1", "b_gcn1", "W_gcn2", "b_gcn2",
    "W_gate", "b_gate",
    "length_table", "Y",
    "B", "b_B",
)


# --- Configuration & vocabulary ---

@dataclass(frozen=True)
class ModelConfig:
    """Sizes and switches of one model."""

    d_e: int = 32
    d: int = 32
    d_len: int = 8
    max_span_len: int = 6
    use_gcn: bool = True
    directed_arcs: bool = False
    encoder: str = "desk"

    @property
    def span_dim(self):
        return 4 * self.d + self.d_len

    def validate(self):
        for name in ("d_e", "d", "d_len", "max_span_len"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.encoder not in ENCODERS:
            raise ConfigError(f"encoder must be one of {ENCODERS}, got {self.encoder!r}")
        return self


class Vocabulary:
    """Token to index map; index 0 is reserved for unknown tokens."""

    UNK = "<unk>"

    def __init__(self, itos):
        itos = list(itos)
        if not itos or itos[0] != self.UNK:
            itos = [self.UNK] + [token for token in itos if token != self.UNK]
        self.itos = itos
        self.stoi = {token: i for i, token in enumerate(itos)}

    @classmethod
    def from_corpus(cls, sentences):
        tokens = {token for sentence in sentences for token in sentence.tokens}
        tokens.discard(cls.UNK)
        return cls([cls.UNK] + sorted(tokens))

    def __len__(self):
        return len(self.itos)

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def index(self, tokens):
        return np.array([self.stoi.get(token, 0) for token in tokens], dtype=np.int64)


@dataclass
class ModelParameters:
    """
    Every learnable tensor plus the config and vocabulary they were built for.

    `tensors` maps each name in PARAMETER_NAMES to a float64 array. Forward
    passes only read it; training updates the arrays in place.
    """

    config: ModelConfig
    vocab: Vocabulary
    tensors: dict = field(default_factory=dict)
    arm: str = None

    def __getitem__(self, name):
        return self.tensors[name]

    def copy(self):
        return ModelParameters(
            config=self.config,
            vocab=self.vocab,
            tensors={name: array.copy() for name, array in self.tensors.items()},
            arm=self.arm,
        )

    def check_shapes(self):
        expected = parameter_shapes(self.config, len(self.vocab))
        for name, shape in expected.items():
            if name not in self.tensors:
                raise ShapeError(f"missing parameter tensor {name}")
            if tuple(self.tensors[name].shape) != shape:
                raise ShapeError(f"{name} has shape {self.tensors[name].shape}, expected {shape}")
        return self


def parameter_shapes(config, vocab_size):
    """Declared shape of every parameter tensor."""
    d, d_e = config.d, config.d_e
    return {
        "E": (vocab_size, d_e),
        "W_c": (3 * d_e, d),
        "b_c": (d,),
        "W_gcn1": (d, d),
        "b_gcn1": (d,),
        "W_gcn2": (d, d),
        "b_gcn2": (d,),
        "W_gate": (2 * d, d),
        "b_gate": (d,),
        "length_table": (config.max_span_len, config.d_len),
        "Y": (2, config.span_dim),
        "B": (2, 2 * d),
        "b_B": (2,),
    }


INIT_SCHEMES = ("scaled", "uniform")
# Lookup tables are drawn at unit range; the class heads Y and B are stored (out, in)
_TABLES = ("E", "length_table")
_HEADS = ("Y", "B")


def _init_limit(name, shape, scheme, init_range):
    if scheme == "uniform":
        return init_range
    if len(shape) == 1:
        return 0.0  # biases start at zero
    if name in _TABLES:
        return 1.0
    fan_in, fan_out = (shape[1], shape[0]) if name in _HEADS else shape
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_parameters(config, vocab, seed=0, init_range=0.1, scheme="scaled"):
    """
    Draws every tensor from a seeded uniform distribution.

    `scheme="uniform"` uses uniform(-init_range, init_range) for everything.
    `scheme="scaled"` (the default) draws weight matrices from the Glorot
    range ±sqrt(6 / (fan_in + fan_out)), embedding and length tables from
    uniform(-1, 1), and starts biases at zero, so activations keep unit
    scale through the encoder, graph and span layers at any d.

    Tensors are drawn in PARAMETER_NAMES order so a seed fixes the whole model.

    Raises:
        ConfigError: On an invalid config or an unknown scheme.
    """
    config.validate()
    if scheme not in INIT_SCHEMES:
        raise ConfigError(f"init scheme must be one of {INIT_SCHEMES}, got {scheme!r}")
    rng = np.random.default_rng(seed)
    shapes = parameter_shapes(config, len(vocab))
    tensors = {}
    for name in PARAMETER_NAMES:
        limit = _init_limit(name, shapes[name], scheme, init_range)
        tensors[name] = rng.uniform(-limit, limit, size=shapes[name]).astype(np.float64)
    return ModelParameters(config=config, vocab=vocab, tensors=tensors)


# --- Encodings ---

@dataclass
class ContextualEncoding:
    H: np.ndarray

    @property
    def d(self):
        return self.H.shape[1]


@dataclass
class GraphEncoding:
    G: np.ndarray


@dataclass
class FusedEncoding:
    Z: np.ndarray
    gate: np.ndarray = None


@dataclass
class SpanRepresentation:
    vector: np.ndarray
    span: tuple


# --- Numerics ---

def relu(x):
    return np.maximum(x, 0.0)


def sigmoid(x):
    """Overflow-free logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    exp_x = np.exp(x[~positive])
    out[~positive] = exp_x / (1.0 + exp_x)
    return out


def log_softmax(logits):
    """Row-wise log-softmax with max subtraction."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


# --- Forward components ---

def _context_windows(X):
    """Rows [x_{t-1}; x_t; x_{t+1}] with zero padding at both ends."""
    zero = np.zeros((1, X.shape[1]), dtype=X.dtype)
    padded = np.concatenate([zero, X, zero], axis=0)
    return np.concatenate([padded[:-2], padded[1:-1], padded[2:]], axis=1)


def _encode(sentence, params, features):
    config = params.config
    T = len(sentence)
    if config.encoder == "precomputed":
        if features is None:
            raise ShapeError("precomputed encoder needs a feature block for every sentence")
        H = np.asarray(features, dtype=np.float64)
        if H.shape != (T, config.d):
            raise ShapeError(f"feature block has shape {H.shape}, expected ({T}, {config.d})")
        return H, {"ids": None}
    ids = params.vocab.index(sentence.tokens)
    C = _context_windows(params["E"][ids])
    H_pre = C @ params["W_c"] + params["b_c"]
    return relu(H_pre), {"ids": ids, "C": C, "H_pre": H_pre}


def _gcn_layers(H, A, params):
    aggregated, pre = [], []
    G = H
    for layer in range(1, NUM_GCN_LAYERS + 1):
        AG = A @ G
        P = AG @ params[f"W_gcn{layer}"] + params[f"b_gcn{layer}"]
        aggregated.append(AG)
        pre.append(P)
        G = relu(P)
    return G, {"aggregated": aggregated, "pre": pre}


def _gate(H, G, params):
    U = np.concatenate([H, G], axis=1)
    S = sigmoid(U @ params["W_gate"] + params["b_gate"])
    return S, U


def encode_tokens(sentence, params, features=None):
    """
    Contextual encoding h_1..h_T of one sentence.

    Desk mode: e_t = E[token_t] (unknown tokens use <unk>) and
    h_t = ReLU(W_c^T [e_{t-1}; e_t; e_{t+1}] + b_c) with zero padding.
    Precomputed mode: the T×d feature block is returned as is.

    Raises:
        ShapeError: In precomputed mode when the block is missing or mis-shaped.
    """
    H, _ = _encode(sentence, params, features)
    return ContextualEncoding(H=H)


def gcn_forward(H, A, params):
    """
    Two graph convolution layers: G(l+1) = ReLU(Â G(l) W(l) + b(l)), G(0) = H.

    Args:
        H (ContextualEncoding): Token encodings.
        A (NormalizedAdjacency): Row-normalised adjacency.
        params (ModelParameters): Supplies W_gcn1/2 and b_gcn1/2.

    Returns:
        GraphEncoding: Output of the second layer.
    """
    if A.matrix.shape != (H.H.shape[0], H.H.shape[0]):
        raise ShapeError(f"adjacency {A.matrix.shape} does not match {H.H.shape[0]} tokens")
    G, _ = _gcn_layers(H.H, A.matrix, params)
    return GraphEncoding(G=G)


def gate_fuse(H, G, params):
    """
    z_t = [h_t ; gate_t ⊙ g_t] with gate_t = σ(W_gate^T [h_t; g_t] + b_gate).

    Returns:
        FusedEncoding: Z (T×2d) and the gate values (T×d).
    """
    if H.H.shape != G.G.shape:
        raise ShapeError(f"H {H.H.shape} and G {G.G.shape} differ")
    S, _ = _gate(H.H, G.G, params)
    return FusedEncoding(Z=np.concatenate([H.H, S * G.G], axis=1), gate=S)


def span_representation(Z, span, params):
    """
    j = [z_b ; z_e ; length_table[e - b + 1]] for a 1-indexed inclusive span.

    Raises:
        ShapeError: If the span is outside the sentence or longer than the length table.
    """
    b, e = span
    T = Z.Z.shape[0]
    if not 1 <= b <= e <= T:
        raise ShapeError(f"span {span} outside 1..{T}")
    length = e - b + 1
    table = params["length_table"]
    if length > table.shape[0]:
        raise ShapeError(f"span length {length} exceeds max span length {table.shape[0]}")
    vector = np.concatenate([Z.Z[b - 1], Z.Z[e - 1], table[length - 1]])
    return SpanRepresentation(vector=vector, span=(b, e))


def span_probabilities(j, params):
    """
    (P_I, P_O) = softmax over classes of j^T y_k, computed with max subtraction.
    """
    logits = params["Y"] @ j.vector
    probs = softmax(logits)
    return float(probs[CLASS_I]), float(probs[CLASS_O])


# --- Full forward pass ---

@dataclass
class ForwardCache:
    """Intermediate values of one forward pass, kept for `backward`."""

    objective: str
    use_gcn: bool
    H: np.ndarray
    Z: np.ndarray
    logits: np.ndarray
    encoder: dict
    spans: list = None
    starts: np.ndarray = None
    ends: np.ndarray = None
    lengths: np.ndarray = None
    J: np.ndarray = None
    A: np.ndarray = None
    G: np.ndarray = None
    gcn: dict = None
    S: np.ndarray = None
    U: np.ndarray = None


def forward(sentence, params, objective="span", use_gcn=None, L=None, features=None):
    """
    Runs the whole network on one sentence and keeps every intermediate.

    Args:
        sentence (AnnotatedSentence): Input sentence.
        params (ModelParameters): Model.
        objective (str): "span" scores enumerated spans, "token" the baseline head.
        use_gcn (bool, optional): Defaults to the model config; False gives z_t = [h_t ; 0].
        L (int, optional): Max span length; defaults to the config's and may not exceed it.
        features (ndarray, optional): T×d block for the precomputed encoder.

    Returns:
        ForwardCache: Logits (columns I, O) and all intermediates.
    """
    config = params.config
    use_gcn = config.use_gcn if use_gcn is None else use_gcn
    H, encoder_cache = _encode(sentence, params, features)
    cache = ForwardCache(objective=objective, use_gcn=use_gcn, H=H, Z=None, logits=None, encoder=encoder_cache)

    if use_gcn:
        cache.A = build_adjacency(sentence.heads, len(sentence), config.directed_arcs).matrix
        cache.G, cache.gcn = _gcn_layers(H, cache.A, params)
        cache.S, cache.U = _gate(H, cache.G, params)
        cache.Z = np.concatenate([H, cache.S * cache.G], axis=1)
    else:
        cache.Z = np.concatenate([H, np.zeros_like(H)], axis=1)  # graph half stays zero

    if objective == "span":
        L = config.max_span_len if L is None else L
        if L > config.max_span_len:
            raise ShapeError(f"max span length {L} exceeds the length table ({config.max_span_len})")
        cache.spans = enumerate_spans(len(sentence), L)
        cache.starts = np.array([b - 1 for b, _ in cache.spans], dtype=np.int64)  # 0-based rows of Z
        cache.ends = np.array([e - 1 for _, e in cache.spans], dtype=np.int64)
        cache.lengths = cache.ends - cache.starts + 1
        cache.J = np.concatenate(
            [cache.Z[cache.starts], cache.Z[cache.ends], params["length_table"][cache.lengths - 1]],
            axis=1,
        )
        cache.logits = cache.J @ params["Y"].T  # no bias: the length embedding carries the prior
    elif objective == "token":
        cache.logits = cache.Z @ params["B"].T + params["b_B"]
    else:
        raise ConfigError(f"unknown objective {objective!r}")
    return cache


def model_forward(sentence, params, L=None, features=None, use_gcn=None):
    """
    Scores every span of up to L tokens.

    Returns:
        list of SpanCandidate: In enumerate_spans order, with (p_I, p_O).
    """
    cache = forward(sentence, params, "span", use_gcn=use_gcn, L=L, features=features)
    probs = softmax(cache.logits)
    return [
        SpanCandidate(start=b, end=e, p_I=float(p[CLASS_I]), p_O=float(p[CLASS_O]))
        for (b, e), p in zip(cache.spans, probs)
    ]


def token_baseline_forward(sentence, params, features=None, use_gcn=None):
    """
    Per-token (P_I, P_O) from the baseline head: softmax(B z_t + b_B).

    Returns:
        list of tuple: One probability pair per token.
    """
    cache = forward(sentence, params, "token", use_gcn=use_gcn, features=features)
    return [(float(p[CLASS_I]), float(p[CLASS_O])) for p in softmax(cache.logits)]


# --- Backward pass ---

def backward(cache, dlogits, params):
    """
    Gradients of a scalar loss with respect to every parameter tensor.

    Args:
        cache (ForwardCache): From `forward` on the same parameters.
        dlogits (ndarray): dLoss/dlogits, same shape as cache.logits.
        params (ModelParameters): Parameters used in the forward pass.

    Returns:
        dict: Parameter name to gradient array (zeros for unused tensors).
    """
    config = params.config
    d = config.d
    grads = {name: np.zeros_like(array) for name, array in params.tensors.items()}

    if cache.objective == "span":
        grads["Y"] = dlogits.T @ cache.J
        dJ = dlogits @ params["Y"]
        dZ = np.zeros_like(cache.Z)
        np.add.at(dZ, cache.starts, dJ[:, : 2 * d])  # a token can start or end many spans
        np.add.at(dZ, cache.ends, dJ[:, 2 * d : 4 * d])
        np.add.at(grads["length_table"], cache.lengths - 1, dJ[:, 4 * d :])
    else:
        grads["B"] = dlogits.T @ cache.Z
        grads["b_B"] = dlogits.sum(axis=0)
        dZ = dlogits @ params["B"]

    dH = dZ[:, :d].copy()
    if cache.use_gcn:
        d_fused = dZ[:, d:]
        S, G = cache.S, cache.G
        dG = d_fused * S
        d_gate_pre = d_fused * G * S * (1.0 - S)  # sigmoid derivative
        grads["W_gate"] = cache.U.T @ d_gate_pre
        grads["b_gate"] = d_gate_pre.sum(axis=0)
        dU = d_gate_pre @ params["W_gate"].T
        dH += dU[:, :d]
        dG += dU[:, d:]
        for layer in range(NUM_GCN_LAYERS, 0, -1):
            P = cache.gcn["pre"][layer - 1]
            dP = dG * (P > 0)  # ReLU mask
            grads[f"W_gcn{layer}"] = cache.gcn["aggregated"][layer - 1].T @ dP
            grads[f"b_gcn{layer}"] = dP.sum(axis=0)
            dG = cache.A.T @ (dP @ params[f"W_gcn{layer}"].T)  # Â is not symmetric after row normalisation
        dH += dG

    if config.encoder == "desk":
        d_e = config.d_e
        dH_pre = dH * (cache.encoder["H_pre"] > 0)
        grads["W_c"] = cache.encoder["C"].T @ dH_pre
        grads["b_c"] = dH_pre.sum(axis=0)
        dC = dH_pre @ params["W_c"].T
        dX = dC[:, d_e : 2 * d_e].copy()  # centre slot of each window
        dX[1:] += dC[:-1, 2 * d_e :]  # token t is the right neighbour of t - 1
        dX[:-1] += dC[1:, :d_e]  # and the left neighbour of t + 1
        np.add.at(grads["E"], cache.encoder["ids"], dX)
    return grads


# --- Precomputed feature sidecar ---

def save_feature_sidecar(path, blocks):
    """Writes per-sentence T×d feature blocks keyed by sentence index."""
    with open(path, "wb") as handle:
        np.savez(handle, **{str(index): np.asarray(block, dtype=np.float64) for index, block in blocks.items()})


def load_feature_sidecar(path):
    """
    Reads a feature sidecar written by `save_feature_sidecar`.

    Returns:
        dict: Sentence index to T×d float64 array.

    Raises:
        CheckpointError: If the file cannot be read or has non-integer keys.
    """
    try:
        with np.load(path, allow_pickle=False) as archive:
            return {int(key): np.asarray(archive[key], dtype=np.float64) for key in archive.files}
    except FileNotFoundError:
        raise CheckpointError(f"feature file not found: {path}") from None
    except (ValueError, OSError) as e:
        raise CheckpointError(f"{path}: unreadable feature sidecar ({e})") from None


# --- Arms ---

ARMS = ("span+gcn", "span", "token-baseline")


def resolve_arm(arm, config):
    """
    Maps an arm name to (objective, use_gcn).

    The span arms fix use_gcn themselves; the token baseline follows the config
    (an unset use_gcn means no graph branch).

    Raises:
        ConfigError: On an unknown arm.
    """
    if arm == "span+gcn":
        return "span", True
    if arm == "span":
        return "span", False
    if arm == "token-baseline":
        return "token", bool(config.use_gcn)
    raise ConfigError(f"arm must be one of {ARMS}, got {arm!r}")
