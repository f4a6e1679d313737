# modules/graph_module.py
# Builds the row-normalised dependency adjacency that the graph convolution
# layers average over.

from dataclasses import dataclass

import numpy as np

from modules.corpus_module import find_head_cycle
from utils.errors import CorpusError


@dataclass(frozen=True)
class NormalizedAdjacency:
    """T×T matrix with non-negative entries whose rows each sum to 1."""

    matrix: np.ndarray
    T: int


def build_adjacency(heads, T, directed_arcs=False):
    """
    Builds D^-1 (A + A^T + I) from a head sequence.

    Each arc (t, head_t) with head_t != 0 connects dependent and head. With
    `directed_arcs` the arc only feeds the dependent's row (A + I instead of
    A + A^T + I). Arc labels are not used.

    Args:
        heads (sequence of int): 1-indexed heads, 0 for roots.
        T (int): Sentence length.
        directed_arcs (bool): Keep only dependent <- head edges.

    Returns:
        NormalizedAdjacency: Row-normalised adjacency with self-loops.

    Raises:
        CorpusError: If heads has the wrong length, an out-of-range head or a cycle.
    """
    if len(heads) != T:
        raise CorpusError(f"heads has {len(heads)} entries for T={T}")
    for t, head in enumerate(heads, 1):
        if not 0 <= head <= T or head == t:
            raise CorpusError(f"invalid head {head} for token {t}")
    cycle = find_head_cycle(heads)
    if cycle:
        raise CorpusError(f"heads contain a cycle through tokens {cycle}")

    A = np.eye(T, dtype=np.float64)  # self-loops
    for t, head in enumerate(heads):
        if head == 0:
            continue
        A[t, head - 1] = 1.0
        if not directed_arcs:
            A[head - 1, t] = 1.0
    degree = A.sum(axis=1, keepdims=True)  # >= 1: every row has its self-loop
    return NormalizedAdjacency(matrix=A / degree, T=T)
