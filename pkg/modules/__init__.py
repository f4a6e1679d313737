# modules/__init__.py
# This file marks the 'modules' directory as a Python package, so the entry
# point can import each component (e.g. `from modules.train_module import train`).

"""
The 'modules' package for SpanGate.

One module per component of the disfluency detector:
    - `corpus_module.py`: sentence records, JSON Lines / CoNLL-U loading, preprocessing, IO <-> spans.
    - `synth_module.py`: seeded synthetic disfluent corpora and train/dev/test splits.
    - `graph_module.py`: row-normalised dependency adjacency.
    - `model_module.py`: encoder, graph convolution, gate, span and token heads, backward pass.
    - `spans_module.py`: span enumeration, gold assignment and greedy decoding.
    - `train_module.py`: loss, Adam, training loop, gradient check, checkpoints.
    - `eval_module.py`: token and span scoring, reports and comparison tables.
    - `inspect_module.py`: bracketed gold vs. predicted rendering for review.

`spangate_cli.py` wires them into the synth / train / predict / eval / inspect
subcommands.
"""
