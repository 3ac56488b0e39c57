#!/usr/bin/env python3
"""
Cross-Lingual Retrieval CLI
---------------------------
Align two embedding spaces, index a target-language collection, rank
source-language topics with any of the five models and evaluate the runs.

Usage:
    # Fit the source→target map on a seed dictionary, report BLI on a test dictionary
    python -m src.xlir align --source-vectors en.vec --target-vectors nl.vec \
        --seed-dictionary en-nl.train.txt --test-dictionary en-nl.test.txt --output en-nl.map

    # Index the collection against the target space
    python -m src.xlir index --target-vectors nl.vec --collection docs.jsonl --index-dir index/

    # Rank topics
    python -m src.xlir run --model tbt-qt --index-dir index/ --source-vectors en.vec \
        --target-vectors nl.vec --alignment en-nl.map --topics topics.tsv --output tbt.run

    # Evaluate
    python -m src.xlir eval --runs tbt.run --qrels qrels.txt

Exit codes: 0 success, 1 usage, 2 input format, 3 numeric/contract failure.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

# Add project root to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from src.xlir.commands import cmd_align, cmd_eval, cmd_experiment, cmd_index, cmd_run
from src.xlir.config import MODEL_NAMES, MODELS_CONFIG, build_config
from src.xlir.errors import UsageError, XlirError
from src.xlir.utils import setup_logging

COMMANDS = {
    "align": cmd_align,
    "index": cmd_index,
    "run": cmd_run,
    "eval": cmd_eval,
    "experiment": cmd_experiment,
}

# argparse destinations that are not ExperimentConfig fields
_CLI_ONLY = {"command", "config", "log_level", "list_models"}


class _Parser(argparse.ArgumentParser):
    """argparse parser that raises UsageError instead of exiting."""

    def error(self, message: str) -> None:
        raise UsageError(message)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--config",
        type=Path,
        help="key=value file with ExperimentConfig fields (flags override it)",
    )
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        default="INFO",
        help="Logging level",
    )


def _add_spaces(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--source-vectors", type=Path, help="Source language vectors (word2vec text)")
    parser.add_argument("--target-vectors", type=Path, help="Target language vectors (word2vec text)")
    parser.add_argument("--source-lang", help="Source language tag")
    parser.add_argument("--target-lang", help="Target language tag")
    parser.add_argument("--max-vocab", type=int, help="Keep only the first N vectors of each file")


def _add_alignment(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed-dictionary", type=Path, help="Seed translation pairs for fitting")
    parser.add_argument("--test-dictionary", type=Path, help="Test pairs for BLI precision@1/@5")
    parser.add_argument("--init-map", type=Path, help="Initial map for refinement without a seed")
    parser.add_argument("--refine-iters", type=int, help="Mutual-NN refinement rounds (default: 1)")
    parser.add_argument("--metric", choices=["cosine", "csls"], help="Similarity for refinement and BLI")
    parser.add_argument("--csls-n", type=int, help="CSLS neighbourhood size (default: 10)")
    parser.add_argument("--center", action="store_const", const=True, help="Center pairs before fitting")


def _add_retrieval(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--topics", type=Path, help="Topics TSV: query_id, title, description")
    parser.add_argument("--source-stopwords", type=Path, help="Query-side stopword file")
    parser.add_argument("--mu", type=float, help="Dirichlet smoothing parameter (default: 1000)")
    parser.add_argument("--lambda-ens", type=float, help="Ensemble weight of run1 (default: 0.7)")
    parser.add_argument("--depth", type=int, help="Documents kept per query (default: 1000)")
    parser.add_argument("--run-tag", help="Run tag written in the last column")
    parser.add_argument("--jobs", type=int, help="Queries ranked concurrently (default: 1)")


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command line arguments."""
    parser = _Parser(
        description="Cross-lingual retrieval with shared word embedding spaces.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument(
        "--list-models", action="store_true", help="List available ranking models and exit"
    )
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    align = sub.add_parser("align", help="Fit and persist the source→target map")
    _add_common(align)
    _add_spaces(align)
    _add_alignment(align)
    align.add_argument("--output", type=Path, help="Where to write the map")
    align.add_argument("--aligned-out", type=Path, help="Also write the projected source space")

    index = sub.add_parser("index", help="Index a JSONL collection")
    _add_common(index)
    _add_spaces(index)
    index.add_argument("--collection", type=Path, help="JSONL collection with id and text")
    index.add_argument("--target-stopwords", type=Path, help="Document-side stopword file")
    index.add_argument("--index-dir", type=Path, help="Index output directory")

    run = sub.add_parser("run", help="Rank topics and write a TREC run")
    _add_common(run)
    _add_spaces(run)
    _add_retrieval(run)
    run.add_argument("--model", help=f"One of: {', '.join(MODEL_NAMES)}")
    run.add_argument("--index-dir", type=Path, help="Index directory from `index`")
    run.add_argument("--alignment", type=Path, help="Map applied to the source space")
    run.add_argument("--run1", type=Path, help="First run for the ensemble model")
    run.add_argument("--run2", type=Path, help="Second run for the ensemble model")
    run.add_argument("--output", type=Path, help="Run file to write")

    evaluate = sub.add_parser("eval", help="Compute AP/MAP of run files")
    _add_common(evaluate)
    evaluate.add_argument("--runs", type=Path, nargs="+", help="Run file(s)")
    evaluate.add_argument("--qrels", type=Path, help="TREC qrels file")
    evaluate.add_argument("--report", type=Path, help="Write the result table here")

    experiment = sub.add_parser("experiment", help="align → index → run all models → eval")
    _add_common(experiment)
    _add_spaces(experiment)
    _add_alignment(experiment)
    _add_retrieval(experiment)
    experiment.add_argument("--collection", type=Path, help="JSONL collection with id and text")
    experiment.add_argument("--target-stopwords", type=Path, help="Document-side stopword file")
    experiment.add_argument("--qrels", type=Path, help="TREC qrels file")
    experiment.add_argument("--output-dir", type=Path, help="Directory for every artifact")
    experiment.add_argument(
        "--ensemble-lambdas",
        type=float,
        nargs="+",
        help="Extra ensemble weights, one run each (default: 0.5 0.7)",
    )

    args = parser.parse_args(argv)
    if not args.list_models and not args.command:
        raise UsageError(f"a command is required: {', '.join(COMMANDS)}")
    return args


def list_models() -> None:
    """Print the ranking models from the registry."""
    print("\nAvailable models:\n")
    for name, spec in MODELS_CONFIG.items():
        print(f"  - {name}: {spec['description']}")
    print()


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    return {k: v for k, v in vars(args).items() if k not in _CLI_ONLY and v is not None}


def main(argv: Optional[List[str]] = None) -> None:
    """Main entry point."""
    try:
        args = parse_args(argv)
        if args.list_models:
            list_models()
            return
        setup_logging(args.log_level)
        config = build_config(args.config, overrides_from_args(args))
        logging.debug(f"Configuration: {config.model_dump()}")
        COMMANDS[args.command](config)
    except XlirError as e:
        logging.error(str(e))
        sys.exit(e.exit_code)
    except KeyboardInterrupt:
        logging.info("Interrupted by user")
        sys.exit(130)
    except Exception as e:
        logging.error(f"Unexpected error: {e}", exc_info=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
