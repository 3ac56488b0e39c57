"""
Base classes for the rankers.
"""

import logging
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from ..corpus_index import preprocess
from ..errors import InputFormatError
from ..utils import iter_lines

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Query:
    """A preprocessed query, optionally with its term-by-term translation."""

    id: str
    lang: str
    tokens: Tuple[str, ...]
    translated_tokens: Optional[Tuple[str, ...]] = None
    retained_oov: int = 0


@dataclass(frozen=True)
class RunEntry:
    doc_id: str
    score: float
    rank: int


@dataclass(frozen=True)
class RankedRun:
    """Ranked documents of one query, TREC run semantics."""

    query_id: str
    entries: Tuple[RunEntry, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def doc_ids(self) -> List[str]:
        return [entry.doc_id for entry in self.entries]

    def rank_of(self) -> Dict[str, int]:
        return {entry.doc_id: entry.rank for entry in self.entries}

    def truncate(self, depth: Optional[int]) -> "RankedRun":
        if depth is None or depth >= len(self.entries):
            return self
        return RankedRun(self.query_id, self.entries[:depth])

    @classmethod
    def from_scores(
        cls,
        query_id: str,
        doc_ids: Sequence[str],
        scores: np.ndarray,
        doc_lex_rank: np.ndarray,
        depth: Optional[int] = None,
    ) -> "RankedRun":
        """Sort by descending score, ties by ascending doc id, ranks from 1."""
        order = np.lexsort((doc_lex_rank, -scores))
        if depth is not None:
            order = order[:depth]
        entries = tuple(
            RunEntry(doc_ids[i], float(scores[i]), rank)
            for rank, i in enumerate(order, start=1)
        )
        return cls(query_id, entries)


class Ranker(ABC):
    """Abstract base class for retrieval models."""

    @property
    @abstractmethod
    def name(self) -> str:
        """Return model identifier (e.g., 'tbt-qt', 'lm-uni')."""
        pass

    @abstractmethod
    def rank(self, query: Query, depth: Optional[int] = None) -> RankedRun:
        """
        Rank the collection for one query.

        Args:
            query: Preprocessed query.
            depth: Keep only the top `depth` documents (None = all).

        Returns:
            RankedRun for the query.
        """
        pass


def rank_queries(
    ranker: Ranker,
    queries: Sequence[Query],
    depth: Optional[int] = None,
    jobs: int = 1,
) -> List[RankedRun]:
    """Rank every query, at most `jobs` at a time; output keeps query order."""
    logger.info(f"Ranking {len(queries)} queries with {ranker.name} (jobs={jobs})")
    if jobs <= 1:
        return [ranker.rank(q, depth) for q in queries]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda q: ranker.rank(q, depth), queries))


def load_topics(
    path: Path, stopwords: FrozenSet[str] = frozenset(), lang: str = "src"
) -> List[Query]:
    """
    Read `query_id<TAB>title<TAB>description` lines into queries.

    The query text is the title and the description joined by a space.
    """
    path = Path(path)
    if not path.exists():
        raise InputFormatError(f"topics file not found: {path}")
    queries: List[Query] = []
    seen = set()
    for line_no, line in iter_lines(path):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise InputFormatError(
                f"{path.name}: expected 3 tab-separated fields at line {line_no}"
            )
        query_id, title, description = (p.strip() for p in parts)
        if not query_id or query_id in seen:
            raise InputFormatError(f"{path.name}: missing or duplicate query id at line {line_no}")
        seen.add(query_id)
        tokens = preprocess(f"{title} {description}", stopwords)
        queries.append(Query(id=query_id, lang=lang, tokens=tuple(tokens)))
    logger.info(f"Loaded {len(queries)} topics from {path}")
    return queries
