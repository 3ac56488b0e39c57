"""
Commands
--------
The pipeline steps behind each CLI subcommand: align, index, run, eval and
experiment (all of them chained).
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from .alignment import (
    AlignmentMap,
    BliReport,
    apply_alignment,
    evaluate_bli,
    load_alignment,
    load_dictionary,
    procrustes_fit,
    refine,
    save_alignment,
)
from .config import BLI_CUTOFFS, MODEL_NAMES, MODELS_CONFIG, ExperimentConfig
from .corpus_index import (
    IndexedCollection,
    build_index,
    load_index,
    load_stopwords,
    read_collection,
    save_index,
)
from .embedding_store import EmbeddingSpace, load_embeddings, normalize_space, write_embeddings
from .errors import UsageError
from .evaluation import (
    EvaluationReport,
    comparison_frame,
    evaluate_runs,
    format_frame,
    load_runs,
    parse_qrels,
    write_report,
)
from .ranking.adapters import BweAggRanker, EnsembleRanker, LmUniRanker, TbtQtRanker
from .ranking.base import Query, RankedRun, Ranker, load_topics, rank_queries
from .ranking.run_writer import read_run, write_run
from .utils import atomic_write_text

logger = logging.getLogger(__name__)

UNSUPERVISED_BOOTSTRAP_ERROR = "unsupervised bootstrap requires an initial map or dictionary"


@dataclass
class AlignResult:
    alignment: AlignmentMap
    path: Path
    refinement_sizes: List[int] = field(default_factory=list)
    bli: Dict[int, BliReport] = field(default_factory=dict)


def load_space(path: Path, lang: str, max_vocab: Optional[int]) -> EmbeddingSpace:
    """Load and normalize one embedding space."""
    return normalize_space(load_embeddings(path, max_vocab=max_vocab, lang=lang))


def cmd_align(config: ExperimentConfig) -> AlignResult:
    """Fit (and refine) the source→target map, persist it, report BLI scores."""
    config.require("source_vectors", "target_vectors", "output")
    if config.seed_dictionary is None and config.init_map is None:
        raise UsageError(UNSUPERVISED_BOOTSTRAP_ERROR)

    source = load_space(config.source_vectors, config.source_lang, config.max_vocab)
    target = load_space(config.target_vectors, config.target_lang, config.max_vocab)

    if config.seed_dictionary is not None:
        seed = load_dictionary(config.seed_dictionary)
        alignment = procrustes_fit(source, target, seed, center=config.center)
    else:
        alignment = load_alignment(config.init_map)

    sizes: List[int] = []
    if config.refine_iters > 0:
        alignment, sizes = refine(
            source,
            target,
            alignment,
            iters=config.refine_iters,
            metric=config.metric,
            csls_n=config.csls_n,
            center=config.center,
        )

    path = save_alignment(alignment, config.output)
    print(f"Alignment map: {path} (dim={alignment.dim}, fitted_on={alignment.fitted_on})")

    aligned = apply_alignment(source, alignment)
    if config.aligned_out is not None:
        write_embeddings(aligned, config.aligned_out)
        logger.info(f"Aligned source space saved to {config.aligned_out}")

    result = AlignResult(alignment=alignment, path=path, refinement_sizes=sizes)
    if config.test_dictionary is not None:
        test_pairs = load_dictionary(config.test_dictionary)
        for k in BLI_CUTOFFS:
            report = evaluate_bli(
                aligned, target, test_pairs, k=k, metric=config.metric, csls_n=config.csls_n
            )
            result.bli[k] = report
            print(f"BLI P@{k}: {report.precision:.4f} ({report.correct}/{report.evaluated})")
    return result


def cmd_index(config: ExperimentConfig) -> IndexedCollection:
    """Build the collection index against the target space and persist it."""
    config.require("target_vectors", "collection", "index_dir")
    target = load_space(config.target_vectors, config.target_lang, config.max_vocab)
    stopwords = load_stopwords(config.target_stopwords)
    index = build_index(read_collection(config.collection), target, stopwords)
    save_index(index, config.index_dir)

    oov_rate = index.oov_doc_terms / index.total_tokens if index.total_tokens else 0.0
    print(f"N={index.doc_count}")
    print(f"total_tokens={index.total_tokens}")
    print(f"embedding_oov_rate={oov_rate:.4f}")
    return index


def query_space(config: ExperimentConfig) -> EmbeddingSpace:
    """The source space in the shared space: projected when a map is given."""
    source = load_space(config.source_vectors, config.source_lang, config.max_vocab)
    if config.alignment is not None:
        source = apply_alignment(source, load_alignment(config.alignment))
    return source


def get_ranker(config: ExperimentConfig, index: Optional[IndexedCollection]) -> Ranker:
    """Build the ranker named by config.model from the models.yaml registry."""
    if config.model not in MODELS_CONFIG:
        raise UsageError(
            f"unknown model '{config.model}', valid models: {', '.join(MODEL_NAMES)}"
        )
    spec = MODELS_CONFIG[config.model]
    family = spec["family"]
    if family == "ensemble":
        return EnsembleRanker(read_run(config.run1), read_run(config.run2), config.lambda_ens)
    if family == "bwe_agg":
        return BweAggRanker(index, query_space(config), spec["weighting"])
    if family == "query_likelihood":
        if not spec.get("translate"):
            return LmUniRanker(index, config.mu)
        target = load_space(config.target_vectors, config.target_lang, config.max_vocab)
        return TbtQtRanker(index, query_space(config), target, config.mu)
    raise UsageError(f"model '{config.model}' has unknown family '{family}'")


def cmd_run(config: ExperimentConfig) -> List[RankedRun]:
    """Rank every topic with the selected model and write a TREC run file."""
    spec = MODELS_CONFIG[config.model]
    needs = list(spec.get("needs", []))
    if spec["family"] == "ensemble":
        if config.run1 is None or config.run2 is None:
            raise UsageError("model 'ensemble' requires two input runs: --run1 and --run2")
    else:
        needs.append("topics")
    config.require("output", *needs)

    index = None
    if spec["family"] != "ensemble":
        index = load_index(config.index_dir) if config.index_dir is not None else None
    ranker = get_ranker(config, index)

    if isinstance(ranker, EnsembleRanker):
        queries = [Query(id=qid, lang=config.source_lang, tokens=()) for qid in ranker.runs1]
    else:
        stopwords = load_stopwords(config.source_stopwords)
        queries = load_topics(config.topics, stopwords, config.source_lang)

    runs = rank_queries(ranker, queries, depth=config.depth, jobs=config.jobs)
    write_run(runs, config.output, config.run_tag)
    return runs


def cmd_eval(config: ExperimentConfig) -> Dict[str, EvaluationReport]:
    """Per-query AP and MAP of one or more run files."""
    config.require("runs", "qrels")
    qrels = parse_qrels(config.qrels)
    reports: Dict[str, EvaluationReport] = {}
    for name, runs in load_runs(config.runs).items():
        report = evaluate_runs(runs, qrels)
        reports[name] = report
        print(f"== {name}")
        for query_id, ap in report.per_query_ap.items():
            print(f"map\t{query_id}\t{ap:.4f}")
        print(f"map\tall\t{report.map:.4f}")

    if len(reports) > 1:
        table = format_frame(comparison_frame(reports))
        print(table, end="")
        if config.report is not None:
            atomic_write_text(config.report, table)
    elif config.report is not None:
        write_report(next(iter(reports.values())), config.report)
    return reports


def cmd_experiment(config: ExperimentConfig) -> Dict[str, EvaluationReport]:
    """
    Align (when a seed is given), index, run all five models, fuse once per
    ensemble weight and evaluate every run.
    """
    config.require(
        "source_vectors", "target_vectors", "collection", "topics", "qrels", "output_dir"
    )
    out = Path(config.output_dir)
    updates: Dict[str, object] = {"index_dir": out / "index"}

    if config.seed_dictionary is not None or config.init_map is not None:
        cmd_align(config.model_copy(update={"output": out / "alignment.txt"}))
        updates["alignment"] = out / "alignment.txt"
    else:
        logger.info("No seed dictionary or initial map: spaces are used as already aligned")

    base = config.model_copy(update=updates)
    cmd_index(base)

    run_paths: Dict[str, Path] = {}
    for model in MODEL_NAMES:
        path = out / "runs" / f"{model}.txt"
        step = base.model_copy(
            update={"model": model, "output": path, "run_tag": f"{config.run_tag}_{model}"}
        )
        if MODELS_CONFIG[model]["family"] == "ensemble":
            step = step.model_copy(
                update={"run1": run_paths["tbt-qt"], "run2": run_paths["bwe-agg-idf"]}
            )
        cmd_run(step)
        run_paths[model] = path

    # one fused run per weight, next to the default-weight ensemble
    for lam in config.ensemble_lambdas:
        name = f"ensemble-{lam:g}"
        path = out / "runs" / f"{name}.txt"
        cmd_run(
            base.model_copy(
                update={
                    "model": "ensemble",
                    "output": path,
                    "run_tag": f"{config.run_tag}_{name}",
                    "run1": run_paths["tbt-qt"],
                    "run2": run_paths["bwe-agg-idf"],
                    "lambda_ens": lam,
                }
            )
        )
        run_paths[name] = path

    reports: Dict[str, EvaluationReport] = {}
    qrels = parse_qrels(config.qrels)
    for model, path in run_paths.items():
        reports[model] = evaluate_runs(read_run(path), qrels)
        write_report(reports[model], out / "eval" / f"{model}.tsv")

    table = format_frame(comparison_frame(reports))
    atomic_write_text(out / "results.tsv", table)
    print(table, end="")
    logging.info("✅ Experiment completed successfully")
    return reports
