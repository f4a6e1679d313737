# spangate_cli.py
# Main entry point for the SpanGate disfluency detection toolkit.
# This script parses the command line, merges it over an optional JSON config
# into one RunConfig, and routes to the subcommand that wires the modules
# together: synth, train, predict, eval and inspect. Every deliberate error
# ends the run with a one-line diagnostic and its exit code.

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from modules.corpus_module import import_conllu, load_jsonl, preprocess_corpus, write_corpus
from modules.eval_module import EvalReport, evaluate, predict_sentence, report_table
from modules.inspect_module import InspectTarget, inspect_sentences
from modules.model_module import ARMS, ModelConfig, load_feature_sidecar
from modules.synth_module import SynthConfig, generate, split
from modules.train_module import TrainConfig, load_checkpoint, save_checkpoint, train, write_metrics
from utils.errors import CorpusError, SpanGateError, UsageError, exit_code_for
from utils.helpers import RunConfig, configure_logging, read_json, write_json, write_jsonl

logger = logging.getLogger("spangate")

DEFAULT_CORPUS_PATH = "corpus.jsonl"
DEFAULT_MODEL_PATH = "spangate.ckpt"
DEFAULT_PREDICTIONS_PATH = "predictions.jsonl"
DEFAULT_REPORT_PATH = "report.json"
DEFAULT_ARM = "span+gcn"

# Parsed attributes that steer the run instead of configuring it
META_ARGS = ("command", "config", "verbose", "quiet")


# ---------------------------------------------------
# Argument parsing
# ---------------------------------------------------
class SpanGateArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting with status 2."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common_flags():
    parser = SpanGateArgumentParser(add_help=False)
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--seed", type=int, help="Seed for generation, initialisation and shuffling")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="More logging (repeatable)")
    parser.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")
    return parser


def _corpus_flags():
    parser = SpanGateArgumentParser(add_help=False)
    parser.add_argument("--corpus", help="Annotated corpus (JSON Lines)")
    parser.add_argument("--conllu", help="CoNLL-U parses, used instead of --corpus")
    parser.add_argument("--labels", help="IO label file parallel to --conllu")
    parser.add_argument(
        "--preprocess", action=argparse.BooleanOptionalAction, default=None,
        help="Lower-case and drop punctuation and partial words before use",
    )
    parser.add_argument("--features", help="Precomputed per-sentence encoder features (.npz)")
    return parser


def _model_flags():
    parser = SpanGateArgumentParser(add_help=False)
    parser.add_argument("--model", help=f"Checkpoint path (default {DEFAULT_MODEL_PATH})")
    parser.add_argument("--arm", choices=ARMS, help="Model arm (default: the checkpoint's training arm)")
    parser.add_argument("--max-span-len", type=int, help="Longest span scored (default: the checkpoint's)")
    return parser


def build_parser():
    """Builds the top-level parser with one subparser per subcommand."""
    common, corpus, model = _common_flags(), _corpus_flags(), _model_flags()
    parser = SpanGateArgumentParser(
        prog="spangate",
        description="Span-classification disfluency detection with gated dependency-graph features.",
    )
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    synth = commands.add_parser("synth", parents=[common], help="Generate a synthetic disfluent corpus")
    synth.add_argument("--out", help=f"Output corpus (default {DEFAULT_CORPUS_PATH})")
    synth.add_argument("--num-sentences", type=int, help="Number of sentences to generate")
    synth.add_argument(
        "--split", action=argparse.BooleanOptionalAction, default=None,
        help="Write <out>.train/.dev/.test.jsonl using split_ratios",
    )

    trainer = commands.add_parser("train", parents=[common, corpus], help="Train one arm and save a checkpoint")
    trainer.add_argument("--dev-corpus", help="Dev corpus for best-epoch selection")
    trainer.add_argument("--dev-features", help="Precomputed features of the dev corpus (.npz)")
    trainer.add_argument("--model", help=f"Checkpoint to write (default {DEFAULT_MODEL_PATH})")
    trainer.add_argument("--out", help="Metrics JSON Lines (default <model>.metrics.jsonl)")
    trainer.add_argument("--arm", choices=ARMS, help=f"Arm to train (default {DEFAULT_ARM})")
    trainer.add_argument("--max-span-len", type=int, help="Longest span enumerated")
    trainer.add_argument("--epochs", type=int, help="Training epochs")
    trainer.add_argument(
        "--use-gcn", action=argparse.BooleanOptionalAction, default=None,
        help="Graph branch for the token baseline (span arms fix it themselves)",
    )

    predict = commands.add_parser("predict", parents=[common, corpus, model], help="Decode spans for a corpus")
    predict.add_argument("--out", help=f"Predictions JSON Lines (default {DEFAULT_PREDICTIONS_PATH})")

    scorer = commands.add_parser("eval", parents=[common, corpus, model], help="Score a model on a corpus")
    scorer.add_argument("--out", help=f"Report JSON (default {DEFAULT_REPORT_PATH})")
    scorer.add_argument(
        "--span-exact", action=argparse.BooleanOptionalAction, default=None,
        help="Count exact span matches instead of tokens",
    )
    scorer.add_argument("--compare", nargs="+", metavar="REPORT", help="Saved reports to add to the table")

    inspector = commands.add_parser(
        "inspect", parents=[common, corpus, model], help="Show gold and predicted spans of chosen sentences"
    )
    inspector.add_argument("--indices", nargs="+", type=int, metavar="N", help="0-based sentence indices")
    inspector.add_argument("--compare-model", help="Second checkpoint to show underneath")
    inspector.add_argument("--compare-arm", choices=ARMS, help="Arm of the second row")
    return parser


# ---------------------------------------------------
# Shared loading
# ---------------------------------------------------
def load_corpus(run_config, path=None):
    """
    Loads the corpus named by --corpus (or `path`), or --conllu with --labels.

    Raises:
        UsageError: When no input is named.
        CorpusError: When the corpus is empty after loading and preprocessing.
    """
    path = path or run_config.corpus
    if path is None and run_config.conllu:
        if not run_config.labels:
            raise UsageError("--conllu needs --labels")
        sentences = import_conllu(run_config.conllu, run_config.labels)
        source = run_config.conllu
    elif path is not None:
        sentences = load_jsonl(path)
        source = path
    else:
        raise UsageError("no corpus given (use --corpus, or --conllu with --labels)")
    if run_config.preprocess:
        sentences, _ = preprocess_corpus(sentences)
    if not sentences:
        raise CorpusError(f"{source}: no sentences")
    logger.info("Loaded %d sentences from %s", len(sentences), source)
    return sentences


def _load_features(path):
    return None if path is None else load_feature_sidecar(path)


def _model_path(run_config):
    return run_config.model or DEFAULT_MODEL_PATH


def _arm(run_config, params):
    return run_config.arm or params.arm or DEFAULT_ARM


def _sibling(path, suffix):
    """'runs/m.ckpt' + '.metrics.jsonl' -> 'runs/m.metrics.jsonl'."""
    path = Path(path)
    return str(path.with_name(path.stem + suffix))


# ---------------------------------------------------
# Subcommands
# ---------------------------------------------------
def cmd_synth(run_config):
    corpus = generate(run_config.section(SynthConfig))
    out = run_config.out or DEFAULT_CORPUS_PATH
    if not run_config.split:
        write_corpus(out, corpus)
        logger.info("Wrote %d sentences to %s", len(corpus), out)
        return
    for part, sentences in zip(("train", "dev", "test"), split(corpus, run_config.split_ratios, run_config.seed)):
        part_path = _sibling(out, f".{part}.jsonl")
        write_corpus(part_path, sentences)
        logger.info("Wrote %d %s sentences to %s", len(sentences), part, part_path)


def cmd_train(run_config):
    corpus = load_corpus(run_config)
    dev = load_corpus(run_config, run_config.dev_corpus) if run_config.dev_corpus else None
    features = _load_features(run_config.features)
    dev_features = _load_features(run_config.dev_features)

    train_config = run_config.section(TrainConfig)
    model_config = run_config.section(ModelConfig)
    if features:
        dims = {block.shape[1] for block in features.values()}
        if len(dims) != 1:
            raise CorpusError(f"{run_config.features}: feature blocks disagree on width {sorted(dims)}")
        model_config = replace(model_config, encoder="precomputed", d=dims.pop())
        logger.info("Using precomputed features of width %d", model_config.d)

    result = train(
        corpus, train_config, model_config, dev=dev, features=features, dev_features=dev_features,
        show_progress=sys.stderr.isatty() and logger.isEnabledFor(logging.INFO),
    )
    model_path = _model_path(run_config)
    save_checkpoint(result.params, model_path)
    metrics_path = run_config.out or _sibling(model_path, ".metrics.jsonl")
    write_metrics(metrics_path, result.metrics)
    logger.info("Wrote checkpoint %s and metrics %s", model_path, metrics_path)


def cmd_predict(run_config):
    params = load_checkpoint(_model_path(run_config))
    corpus = load_corpus(run_config)
    features = _load_features(run_config.features)
    arm = _arm(run_config, params)
    records = []
    for index, sentence in enumerate(corpus):
        block = None if features is None else features.get(index)
        prediction = predict_sentence(params, sentence, arm, features=block, L=run_config.max_span_len)
        records.append({
            "index": index,
            "tokens": list(sentence.tokens),
            "spans": [list(span) for span in prediction.spans],
            "labels": [label.value for label in prediction.labels],
        })
    out = run_config.out or DEFAULT_PREDICTIONS_PATH
    write_jsonl(out, records)
    logger.info("Wrote predictions for %d sentences to %s", len(records), out)


def cmd_eval(run_config):
    params = load_checkpoint(_model_path(run_config))
    corpus = load_corpus(run_config)
    report = evaluate(
        params, corpus, _arm(run_config, params),
        features=_load_features(run_config.features),
        span_exact=run_config.span_exact,
        L=run_config.max_span_len,
    )
    out = run_config.out or DEFAULT_REPORT_PATH
    write_json(out, report.to_dict())
    reports = [report] + [EvalReport.from_dict(read_json(path)) for path in run_config.compare]
    table = report_table(reports)
    if run_config.compare:
        compare_path = _sibling(out, ".compare.json")
        with open(compare_path, "w", encoding="utf-8") as handle:
            handle.write(table.to_json())
        logger.info("Wrote comparison table to %s", compare_path)
    sys.stdout.write(table.to_text())
    logger.info("Wrote report to %s", out)


def cmd_inspect(run_config):
    params = load_checkpoint(_model_path(run_config))
    corpus = load_corpus(run_config)
    features = _load_features(run_config.features)
    arm = _arm(run_config, params)
    targets = [InspectTarget(name=arm, params=params, arm=arm, features=features)]
    if run_config.compare_model or run_config.compare_arm:
        other = load_checkpoint(run_config.compare_model) if run_config.compare_model else params
        other_arm = run_config.compare_arm or other.arm or DEFAULT_ARM
        name = other_arm if not run_config.compare_model else f"{other_arm}@{Path(run_config.compare_model).stem}"
        if name == arm:
            name += " (2)"
        targets.append(InspectTarget(name=name, params=other, arm=other_arm, features=features))
    sys.stdout.write(inspect_sentences(corpus, run_config.indices, targets))


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "inspect": cmd_inspect,
}


# ---------------------------------------------------
# Entry point
# ---------------------------------------------------
def build_run_config(args):
    """Dataclass defaults, then the --config file, then every flag that was given."""
    base = RunConfig.from_json(args.config) if args.config else RunConfig()
    overrides = {key: value for key, value in vars(args).items() if key not in META_ARGS}
    return base.with_overrides(overrides)


def run(argv=None):
    """
    Runs one subcommand.

    Args:
        argv (list of str, optional): Arguments without the program name;
            defaults to sys.argv[1:].

    Returns:
        int: 0 success, 1 usage error, 2 data error, 3 runtime error.
    """
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:  # --help
        return e.code or 0
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return exit_code_for(e)

    configure_logging(-1 if args.quiet else args.verbose)
    try:
        run_config = build_run_config(args)
        COMMANDS[args.command](run_config)
    except SpanGateError as e:
        logger.debug("Failure detail", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return exit_code_for(e)
    except Exception as e:
        logger.debug("Failure detail", exc_info=True)
        print(f"error: unexpected {type(e).__name__}: {e}", file=sys.stderr)
        return exit_code_for(e)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
