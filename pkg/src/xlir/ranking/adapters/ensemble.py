"""
Rank fusion of two runs: fused(d) = λ·r1(d) + (1-λ)·r2(d), lower is better.
"""
import logging
from typing import Dict, List, Mapping, Optional

import numpy as np

from ...config import DEFAULT_LAMBDA_ENS
from ...errors import ContractError
from ..base import Query, RankedRun, Ranker, RunEntry

logger = logging.getLogger(__name__)


def ensemble_rank(
    run1: RankedRun, run2: RankedRun, lambda_ens: float = DEFAULT_LAMBDA_ENS
) -> RankedRun:
    """
    Fuse two runs of the same query by their ranks.

    A document missing from one run takes that run's maximum rank + 1.
    Output is ordered by ascending fused rank, ties by ascending doc id, and
    each entry's score is the negated fused rank.
    """
    if run1.query_id != run2.query_id:
        raise ContractError(
            f"cannot fuse runs of different queries: {run1.query_id} vs {run2.query_id}"
        )
    if not 0.0 <= lambda_ens <= 1.0:
        raise ContractError(f"lambda_ens must be in [0, 1], got {lambda_ens}")

    ranks1, ranks2 = run1.rank_of(), run2.rank_of()
    missing1 = max(ranks1.values(), default=0) + 1
    missing2 = max(ranks2.values(), default=0) + 1
    doc_ids = sorted(set(ranks1) | set(ranks2))

    fused = [
        lambda_ens * ranks1.get(d, missing1) + (1.0 - lambda_ens) * ranks2.get(d, missing2)
        for d in doc_ids
    ]
    # doc_ids is sorted, so the positional index doubles as the tie-break key
    order = np.lexsort((np.arange(len(doc_ids)), np.array(fused, dtype=np.float64)))
    entries = tuple(
        RunEntry(doc_ids[i], -fused[i], rank) for rank, i in enumerate(order, start=1)
    )
    return RankedRun(run1.query_id, entries)


def ensemble_runs(
    runs1: Mapping[str, RankedRun],
    runs2: Mapping[str, RankedRun],
    lambda_ens: float = DEFAULT_LAMBDA_ENS,
) -> Dict[str, RankedRun]:
    """Fuse two run sets query by query; both must cover the same queries."""
    if set(runs1) != set(runs2):
        only = sorted(set(runs1) ^ set(runs2))
        raise ContractError(f"run files cover different queries: {', '.join(only)}")
    return {qid: ensemble_rank(runs1[qid], runs2[qid], lambda_ens) for qid in runs1}


class EnsembleRanker(Ranker):
    """Fuses two precomputed run sets for each incoming query."""

    def __init__(
        self,
        runs1: Mapping[str, RankedRun],
        runs2: Mapping[str, RankedRun],
        lambda_ens: float = DEFAULT_LAMBDA_ENS,
    ):
        if set(runs1) != set(runs2):
            only = sorted(set(runs1) ^ set(runs2))
            raise ContractError(f"run files cover different queries: {', '.join(only)}")
        self.runs1 = runs1
        self.runs2 = runs2
        self.lambda_ens = lambda_ens

    @property
    def name(self) -> str:
        return "ensemble"

    def rank(self, query: Query, depth: Optional[int] = None) -> RankedRun:
        if query.id not in self.runs1 or query.id not in self.runs2:
            raise ContractError(f"query {query.id} is missing from an input run")
        fused = ensemble_rank(self.runs1[query.id], self.runs2[query.id], self.lambda_ens)
        return fused.truncate(depth)

    def query_ids(self) -> List[str]:
        return sorted(self.runs1)
