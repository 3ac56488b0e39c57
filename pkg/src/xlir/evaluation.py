"""
Evaluation
----------
Relevance judgments, average precision, MAP and precision@k over ranked
runs, with trec_eval conventions: binary relevance (grade > 0) and queries
without relevant documents left out of the mean.
"""
import logging
import numbers
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence, Set, Tuple

import pandas as pd

from .config import EVAL_CUTOFFS
from .errors import ContractError, InputFormatError
from .ranking.base import RankedRun
from .ranking.run_writer import read_run
from .utils import atomic_write_text, iter_lines

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["metric", "query_id", "value"]


@dataclass
class Qrels:
    """(query_id, doc_id) → relevance grade, with parsing diagnostics."""

    judgments: Dict[Tuple[str, str], int] = field(default_factory=dict)
    line_count: int = 0
    duplicates: int = 0

    @property
    def query_ids(self) -> List[str]:
        return sorted({q for q, _ in self.judgments})

    def relevant(self, query_id: str) -> Set[str]:
        return {d for (q, d), rel in self.judgments.items() if q == query_id and rel > 0}

    def relevant_by_query(self) -> Dict[str, Set[str]]:
        grouped: Dict[str, Set[str]] = {q: set() for q in self.query_ids}
        for (q, d), rel in self.judgments.items():
            if rel > 0:
                grouped[q].add(d)
        return grouped


def parse_qrels(path: Path) -> Qrels:
    """
    Read TREC qrels: `query_id 0 doc_id relevance`.

    Duplicate (query, doc) lines keep the last grade and are counted.

    Raises:
        InputFormatError: unreadable file, or a line that is not four fields
            with an integer relevance >= 0 (message names the line).
    """
    path = Path(path)
    if not path.is_file():
        raise InputFormatError(f"qrels file not readable: {path}")
    qrels = Qrels()
    for line_no, line in iter_lines(path):
        parts = line.split()
        if not parts:
            continue
        qrels.line_count += 1
        if len(parts) != 4:
            raise InputFormatError(
                f"{path.name}: expected 4 fields at line {line_no}, got {len(parts)}"
            )
        query_id, _, doc_id, grade = parts
        try:
            relevance = int(grade)
        except ValueError:
            raise InputFormatError(f"{path.name}: bad relevance at line {line_no}") from None
        if relevance < 0:
            raise InputFormatError(f"{path.name}: negative relevance at line {line_no}")
        key = (query_id, doc_id)
        if key in qrels.judgments:
            qrels.duplicates += 1
        qrels.judgments[key] = relevance
    if qrels.duplicates:
        logger.warning(f"{path.name}: {qrels.duplicates} duplicate judgment(s), last kept")
    logger.info(f"Read {qrels.line_count} judgments for {len(qrels.query_ids)} queries")
    return qrels


def average_precision(run: RankedRun, relevant: Set[str]) -> float:
    """Mean over relevant documents of precision at their rank; unretrieved ones add 0."""
    if not relevant:
        raise ContractError("average precision needs at least one relevant document")
    hits = 0
    total = 0.0
    for position, doc_id in enumerate(run.doc_ids, start=1):
        if doc_id in relevant:
            hits += 1
            total += hits / position
    return total / len(relevant)


def precision_at_k(run: RankedRun, relevant: Set[str], k: int) -> float:
    """|top-k ∩ relevant| / k, with k fixed even when the run is shorter."""
    if k < 1:
        raise ContractError("k must be >= 1")
    return sum(1 for doc_id in run.doc_ids[:k] if doc_id in relevant) / k


@dataclass
class EvaluationReport:
    """Per-query and mean scores of one run set."""

    map: float
    per_query_ap: Dict[str, float]
    per_query_precision: Dict[int, Dict[str, float]]
    missing_from_run: List[str] = field(default_factory=list)
    unjudged_in_run: List[str] = field(default_factory=list)
    no_relevant: List[str] = field(default_factory=list)

    @property
    def evaluated(self) -> int:
        return len(self.per_query_ap)

    def mean_precision(self, k: int) -> float:
        values = self.per_query_precision[k]
        return sum(values.values()) / len(values)


def evaluate_runs(
    runs: Mapping[str, RankedRun],
    qrels: Qrels,
    cutoffs: Sequence[int] = EVAL_CUTOFFS,
) -> EvaluationReport:
    """
    AP and P@k for every judged query with at least one relevant document.

    Judged queries missing from `runs` score 0; run queries without
    judgments are ignored. Both are listed on the report.

    Raises:
        ContractError: if no query can be evaluated.
    """
    relevant_by_query = qrels.relevant_by_query()
    no_relevant = sorted(q for q, rel in relevant_by_query.items() if not rel)
    evaluable = sorted(q for q, rel in relevant_by_query.items() if rel)
    unjudged = sorted(set(runs) - set(relevant_by_query))
    missing = [q for q in evaluable if q not in runs]

    if not evaluable or len(missing) == len(evaluable):
        raise ContractError("zero evaluable queries: no run query has relevant documents")

    per_query_ap: Dict[str, float] = {}
    per_query_precision: Dict[int, Dict[str, float]] = {k: {} for k in cutoffs}
    for query_id in evaluable:
        run = runs.get(query_id, RankedRun(query_id))
        relevant = relevant_by_query[query_id]
        per_query_ap[query_id] = average_precision(run, relevant)
        for k in cutoffs:
            per_query_precision[k][query_id] = precision_at_k(run, relevant, k)

    if missing:
        logger.warning(f"{len(missing)} judged query(ies) missing from run, scored 0: {missing}")
    if unjudged:
        logger.info(f"{len(unjudged)} run query(ies) without judgments ignored: {unjudged}")
    if no_relevant:
        logger.info(f"{len(no_relevant)} query(ies) without relevant documents excluded")

    report = EvaluationReport(
        map=sum(per_query_ap.values()) / len(per_query_ap),
        per_query_ap=per_query_ap,
        per_query_precision=per_query_precision,
        missing_from_run=missing,
        unjudged_in_run=unjudged,
        no_relevant=no_relevant,
    )
    logger.info(f"MAP = {report.map:.4f} over {report.evaluated} queries")
    return report


def mean_average_precision(
    runs: Mapping[str, RankedRun], qrels: Qrels
) -> Tuple[float, Dict[str, float]]:
    """MAP and the per-query AP table."""
    report = evaluate_runs(runs, qrels, cutoffs=())
    return report.map, report.per_query_ap


def report_frame(report: EvaluationReport) -> pd.DataFrame:
    """Rows of (metric, query_id, value): per-query rows by query id, then 'all'."""
    rows: List[Dict[str, object]] = []
    for query_id in sorted(report.per_query_ap):
        rows.append({"metric": "map", "query_id": query_id, "value": report.per_query_ap[query_id]})
        for k, values in report.per_query_precision.items():
            rows.append({"metric": f"P_{k}", "query_id": query_id, "value": values[query_id]})
    rows.append({"metric": "map", "query_id": "all", "value": report.map})
    for k in report.per_query_precision:
        rows.append({"metric": f"P_{k}", "query_id": "all", "value": report.mean_precision(k)})
    rows.append({"metric": "num_q", "query_id": "all", "value": report.evaluated})
    # object dtype keeps num_q an integer next to the float metrics
    return pd.DataFrame(rows, columns=REPORT_COLUMNS, dtype=object)


def _format_cell(value: object) -> str:
    if isinstance(value, numbers.Integral):
        return str(value)
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def format_frame(frame: pd.DataFrame) -> str:
    """Tab-separated text: counts as integers, metric values to 4 decimals."""
    cells = frame.apply(lambda column: column.map(_format_cell))
    return cells.to_csv(sep="\t", index=False, lineterminator="\n")


def write_report(report: EvaluationReport, path: Path) -> Path:
    """Write the per-query table tab-separated."""
    return atomic_write_text(Path(path), format_frame(report_frame(report)))


def comparison_frame(reports: Mapping[str, EvaluationReport]) -> pd.DataFrame:
    """One row per run: MAP, P@k means and number of evaluated queries."""
    rows = []
    for name, report in reports.items():
        row: Dict[str, object] = {"run": name, "map": report.map}
        for k in report.per_query_precision:
            row[f"P_{k}"] = report.mean_precision(k)
        row["num_q"] = report.evaluated
        rows.append(row)
    return pd.DataFrame(rows)


def load_runs(paths: Iterable[Path]) -> Dict[str, Dict[str, RankedRun]]:
    """Read several run files keyed by file stem."""
    return {Path(p).stem: read_run(p) for p in paths}
