"""
TREC run files: `query_id Q0 doc_id rank score run_tag`, one line per entry.
"""
import logging
from pathlib import Path
from typing import Dict, Iterable, List

from ..errors import InputFormatError
from ..utils import atomic_write_text, iter_lines
from .base import RankedRun, RunEntry

logger = logging.getLogger(__name__)


def format_run(runs: Iterable[RankedRun], run_tag: str) -> str:
    """Render runs as TREC lines with 6-decimal scores."""
    lines: List[str] = []
    for run in runs:
        for entry in run.entries:
            lines.append(
                f"{run.query_id} Q0 {entry.doc_id} {entry.rank} {entry.score:.6f} {run_tag}"
            )
    return "\n".join(lines) + "\n" if lines else ""


def write_run(runs: Iterable[RankedRun], path: Path, run_tag: str) -> Path:
    """Write runs to a TREC run file atomically."""
    runs = list(runs)
    atomic_write_text(Path(path), format_run(runs, run_tag))
    logger.info(f"📁 Run saved to: {path} ({len(runs)} queries)")
    return Path(path)


def read_run(path: Path) -> Dict[str, RankedRun]:
    """
    Parse a TREC run file into runs keyed by query id, entries ordered by rank.

    Raises:
        InputFormatError: on a line without 6 fields, a bad rank or score,
            or a document listed twice for one query.
    """
    path = Path(path)
    if not path.exists():
        raise InputFormatError(f"run file not found: {path}")
    grouped: Dict[str, List[RunEntry]] = {}
    seen: Dict[str, set] = {}
    for line_no, line in iter_lines(path):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 6:
            raise InputFormatError(
                f"{path.name}: expected 6 fields at line {line_no}, got {len(parts)}"
            )
        query_id, _, doc_id, rank, score, _ = parts
        try:
            entry = RunEntry(doc_id, float(score), int(rank))
        except ValueError:
            raise InputFormatError(f"{path.name}: bad rank or score at line {line_no}") from None
        if doc_id in seen.setdefault(query_id, set()):
            raise InputFormatError(
                f"{path.name}: document {doc_id} repeated for query {query_id} at line {line_no}"
            )
        seen[query_id].add(doc_id)
        grouped.setdefault(query_id, []).append(entry)

    runs = {
        qid: RankedRun(qid, tuple(sorted(entries, key=lambda e: (e.rank, e.doc_id))))
        for qid, entries in grouped.items()
    }
    logger.info(f"Read run {path} ({len(runs)} queries)")
    return runs
