"""Command-line interface: filter, train, extract, eval, sweep, cloud, lm-build, synth.

Exit codes: 0 ok, 2 usage or configuration, 3 I/O, 4 data, 5 model.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from . import __version__
from .config import PipelineConfig, get_config
from .corpus import CorpusLayout, read_text
from .exceptions import ConfigurationError, CorpusIOError, LightAKEError
from .langmodel import DomainLM, lm_train
from .pipeline import (
    Pipeline,
    companion_lm_path,
    load_pos_lexicon,
    sweep,
    train_lm,
    train_model,
)
from .store import DEFAULT_CLOUD_SIZE, IndexStore, build_cloud, cloud_json
from .summarizer import length_filter, light_filter
from .synthetic import generate_corpus
from .textcore import TextAnalyzer

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def _float_list(text: str) -> list[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def _int_list(text: str) -> list[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def _str_list(text: str) -> list[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def _add_common(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("configuration")
    group.add_argument("--config", dest="config_file", type=Path, help="key = value config file")
    group.add_argument("--language", help="Language code (default: en)")
    group.add_argument("--stopwords", dest="stopwords_path", type=Path, help="Stopword list")
    group.add_argument(
        "--abbreviations", dest="abbreviations_path", type=Path, help="Abbreviation list"
    )
    group.add_argument("--pos-lexicon", dest="pos_lexicon_path", type=Path, help="POS lexicon")
    group.add_argument("--jobs", type=int, help="Parallel workers (default: 1)")
    group.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    group.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")


def _add_filter_flags(parser: argparse.ArgumentParser, cr_help: str) -> None:
    parser.add_argument("--cr", type=float, help=cr_help)
    parser.add_argument("--metric", help="Distance metric (default: manhattan)")
    parser.add_argument("--ssc", help="Support set cardinality, e.g. 10%% or 8 (default: 10%%)")
    parser.add_argument("--minkowski-p", dest="minkowski_p", type=float, help="Minkowski order")


def _add_training_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--lm", dest="lm_path", type=Path, help="Domain language model file")
    parser.add_argument("--seed", type=int, help="Bootstrap seed (default: 13)")
    parser.add_argument("--bags", type=int, help="Number of trees (default: 10)")
    parser.add_argument("--max-depth", dest="max_depth", type=int, help="Tree depth cap")
    parser.add_argument("--min-leaf", dest="min_leaf", type=int, help="Minimum leaf size")
    parser.add_argument(
        "--max-phrase-len", dest="max_phrase_len", type=int, help="Longest candidate (words)"
    )


def _add_override(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--override-cr",
        dest="override_cr",
        action="store_true",
        default=None,
        help="Allow a CR different from the model's training CR",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lightake",
        description="Light filtering and keyphrase extraction for news stories",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", help="Remove the least central sentences of a story")
    p.add_argument("input", type=Path, help="Story text file")
    p.add_argument("--out", type=Path, help="Filtered text (default: stdout)")
    p.add_argument(
        "--map",
        dest="map_path",
        type=Path,
        help="Index-map sidecar (default: OUT.map.json, or INPUT.map.json without --out)",
    )
    p.add_argument(
        "--summary-sentences",
        dest="summary_sentences",
        type=int,
        help="Keep this many most central sentences instead of filtering by CR",
    )
    _add_filter_flags(p, "Fraction of sentences to remove (default: 0.1)")
    _add_common(p)
    p.set_defaults(handler=cmd_filter)

    p = sub.add_parser("train", help="Train a keyphrase model on a gold-annotated corpus")
    p.add_argument("corpus", type=Path, help="Directory of <id>.txt and <id>.key files")
    p.add_argument("--out", dest="model_path", type=Path, required=True, help="Model file")
    _add_filter_flags(p, "Filtering CR applied to training stories (default: 0.1)")
    _add_training_flags(p)
    _add_common(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("extract", help="Extract keyphrases from a story")
    p.add_argument("input", type=Path, help="Story text file")
    p.add_argument("--model", dest="model_path", type=Path, help="Model file")
    p.add_argument("--lm", dest="lm_path", type=Path, help="Domain language model file")
    p.add_argument("--k", type=int, help="Number of keyphrases (default: 10)")
    p.add_argument("--doc-id", dest="doc_id", help="Story id (default: file stem)")
    p.add_argument("--index", dest="index_path", type=Path, help="Append an index record here")
    p.add_argument(
        "--no-filter", dest="no_filter", action="store_true", help="Input is already filtered"
    )
    _add_filter_flags(p, "Filtering CR (default: the model's training CR)")
    _add_override(p)
    _add_common(p)
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser("eval", help="Evaluate a model on a gold-annotated corpus")
    p.add_argument("corpus", type=Path, help="Directory of <id>.txt and <id>.key files")
    p.add_argument("--model", dest="model_path", type=Path, help="Model file")
    p.add_argument("--lm", dest="lm_path", type=Path, help="Domain language model file")
    p.add_argument("--k", dest="ks", type=_int_list, help="Cutoffs, e.g. 10,20,30 (default: 10)")
    p.add_argument("--per-doc", dest="per_doc", action="store_true", help="Print per-story rows")
    _add_filter_flags(p, "Filtering CR (default: the model's training CR)")
    _add_override(p)
    _add_common(p)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("sweep", help="Evaluate the CR × SSC × metric × k grid")
    p.add_argument("corpus", type=Path, help="Directory with train/ and test/ sub-corpora")
    p.add_argument("--out", type=Path, required=True, help="Output directory")
    p.add_argument("--crs", type=_float_list, default=[0.0, 0.1], help="Comma-separated CRs")
    p.add_argument("--metrics", type=_str_list, default=["manhattan"], help="Distance metrics")
    p.add_argument("--sscs", type=_str_list, default=["10%"], help="Support set cardinalities")
    p.add_argument("--ks", type=_int_list, default=[10], help="Keyphrase cutoffs")
    p.add_argument("--minkowski-p", dest="minkowski_p", type=float, help="Minkowski order")
    _add_training_flags(p)
    _add_common(p)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("cloud", help="Aggregate indexed keyphrases into cloud data")
    p.add_argument("index", type=Path, help="JSON-lines index store")
    p.add_argument("--top", type=int, default=DEFAULT_CLOUD_SIZE, help="Cloud size (default: 10)")
    p.add_argument("--out", type=Path, help="Cloud JSON (default: stdout)")
    _add_common(p)
    p.set_defaults(handler=cmd_cloud)

    p = sub.add_parser("lm-build", help="Build the 4-gram domain language model")
    p.add_argument("paths", type=Path, nargs="+", help="Corpus text files or directories")
    p.add_argument("--out", type=Path, required=True, help="Language model file")
    _add_common(p)
    p.set_defaults(handler=cmd_lm_build)

    p = sub.add_parser("synth", help="Write a synthetic annotated corpus")
    p.add_argument("--out", type=Path, required=True, help="Corpus directory")
    p.add_argument("--stories", type=int, default=50, help="Training stories (default: 50)")
    p.add_argument("--test-stories", dest="test_stories", type=int, default=10)
    p.add_argument("--seed", type=int, default=7, help="Generator seed (default: 7)")
    _add_common(p)
    p.set_defaults(handler=cmd_synth)

    return parser


def config_from_args(args: argparse.Namespace, **extra: Any) -> PipelineConfig:
    """Merge command-line flags over env vars, the config file and defaults."""
    overrides = {
        name: getattr(args, name)
        for name in PipelineConfig.model_fields
        if getattr(args, name, None) is not None
    }
    overrides.update({key: value for key, value in extra.items() if value is not None})
    return get_config(**overrides)


def _write_output(path: Optional[Path], text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise CorpusIOError(f"Cannot write {path}: {e}") from e


def cmd_filter(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    analyzer = TextAnalyzer.from_config(config)
    document = analyzer.analyze(args.input.stem, read_text(args.input), str(args.input))
    centrality = config.centrality()

    if config.summary_sentences:
        result = length_filter(document, config.summary_sentences, centrality, analyzer.stopwords)
    else:
        result = light_filter(document, config.cr, centrality, analyzer.stopwords)
    if result.guard_triggered:
        logger.info(f"{args.input}: too short to filter at cr={config.cr:g}, left unchanged")

    _write_output(args.out, result.document.text() + "\n")
    map_path = args.map_path or Path(f"{args.out or args.input}.map.json")
    sidecar = {
        "source": str(args.input),
        "kept_indices": list(result.kept_indices),
        "guard_triggered": result.guard_triggered,
        "cr": result.cr,
        "config": config.provenance(),
    }
    _write_output(map_path, json.dumps(sidecar, indent=2) + "\n")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    analyzer = TextAnalyzer.from_config(config)
    stories = CorpusLayout.discover(args.corpus).load_annotated(analyzer)

    if config.lm_path:
        lm = DomainLM.load(config.lm_path)
    else:
        lm = train_lm([document for document, _ in stories])
    model = train_model(stories, config, lm, load_pos_lexicon(config), analyzer.stopwords)

    model.save(args.model_path)
    if not config.lm_path:
        lm.save(companion_lm_path(args.model_path))
    return 0


def cmd_extract(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    pipeline = Pipeline.load(config)
    doc_id = args.doc_id or args.input.stem
    text = read_text(args.input)

    if args.no_filter:
        keyphrases = pipeline.extract(pipeline.analyzer.analyze(doc_id, text, str(args.input)))
        scored = [(kp.phrase, kp.score) for kp in keyphrases]
    else:
        record = pipeline.process_story(doc_id, text, cr=config.cr if args.cr is not None else None)
        scored = [(kp.phrase, kp.score) for kp in record.keyphrases]
        if config.index_path:
            IndexStore(config.index_path).append([record])

    lines = [f"{rank}\t{score:.6f}\t{phrase}\n" for rank, (phrase, score) in enumerate(scored, 1)]
    sys.stdout.write("".join(lines))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    pipeline = Pipeline.load(config)
    stories = CorpusLayout.discover(args.corpus).load_annotated(pipeline.analyzer)
    reports, loss = pipeline.evaluate(
        stories, args.ks or [config.k], config.cr if args.cr is not None else None
    )

    sys.stdout.write(f"# config: {json.dumps(config.provenance(), sort_keys=True)}\n")
    for report in reports:
        frame = report.to_frame()
        sys.stdout.write(frame.to_csv(sep="\t", index=False, float_format="%.2f"))
        if args.per_doc:
            sys.stdout.write(report.docs_frame().to_csv(sep="\t", index=False, float_format="%.4f"))
    sys.stdout.write(f"# keyphrase loss: {loss.loss:.2f}%\n")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    if any(not 0.0 <= cr < 1.0 for cr in args.crs):
        raise ConfigurationError(f"Compression ratios must be in [0, 1), got {args.crs}")
    result = sweep(args.corpus, config, args.crs, args.metrics, args.sscs, args.ks)
    result.write(args.out)
    sys.stdout.write(result.pretty() + "\n")
    return 0


def cmd_cloud(args: argparse.Namespace) -> int:
    if args.top < 1:
        raise ConfigurationError(f"Cloud size must be >= 1, got {args.top}")
    entries = build_cloud(IndexStore(args.index).read(), args.top)
    _write_output(args.out, cloud_json(entries) + "\n")
    return 0


def _expand_paths(paths: Sequence[Path]) -> list[Path]:
    expanded: list[Path] = []
    for path in paths:
        if path.is_dir():
            expanded.extend(sorted(path.glob("*.txt")))
        else:
            expanded.append(path)
    return expanded


def cmd_lm_build(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    lm = lm_train(_expand_paths(args.paths), TextAnalyzer.from_config(config))
    lm.save(args.out)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    train, test = generate_corpus(
        args.out, args.stories, args.test_stories, args.seed, config.language
    )
    logger.info(f"Synthetic corpus: {len(train)} training, {len(test)} test stories")
    return 0


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.INFO
    if getattr(args, "verbose", False):
        level = logging.DEBUG
    elif getattr(args, "quiet", False):
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)


def main(argv: Optional[Sequence[str]] = None, configure_logging: bool = False) -> int:
    """Run one command and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    if configure_logging:
        _configure_logging(args)

    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except LightAKEError as e:
        logger.error(str(e), exc_info=getattr(args, "verbose", False))
        return e.exit_code


def cli():
    """CLI entry point for lightake."""
    sys.exit(main(sys.argv[1:], configure_logging=True))


if __name__ == "__main__":
    cli()
