"""
Embedding aggregation ranker: cosine between the summed query embedding
and the (optionally IDF-weighted) summed document embedding.
"""
import logging
from typing import Literal, Optional

import numpy as np

from ...corpus_index import IndexedCollection, query_embedding
from ...embedding_store import COSINE_SENTINEL, EmbeddingSpace
from ...errors import ContractError
from ..base import Query, RankedRun, Ranker

logger = logging.getLogger(__name__)

Weighting = Literal["add", "idf"]


def aggregation_scores(
    index: IndexedCollection, query_vec: np.ndarray, weighting: Weighting
) -> np.ndarray:
    """Cosine of the query vector with every stored document vector.

    Zero document vectors, or a zero query vector, score COSINE_SENTINEL.
    """
    if weighting not in ("add", "idf"):
        raise ContractError(f"unknown weighting: {weighting}")
    doc_vecs = index.doc_vec_add if weighting == "add" else index.doc_vec_idf
    if query_vec.shape[0] != doc_vecs.shape[1]:
        raise ContractError(
            f"dimension mismatch: query space {query_vec.shape[0]}, "
            f"index {doc_vecs.shape[1]}"
        )
    q_norm = float(np.linalg.norm(query_vec))
    scores = np.full(index.doc_count, COSINE_SENTINEL, dtype=np.float64)
    if q_norm == 0.0:
        return scores
    d_norms = np.linalg.norm(doc_vecs, axis=1)
    defined = d_norms > 0.0
    cos = (doc_vecs[defined] @ query_vec) / (d_norms[defined] * q_norm)
    scores[defined] = np.clip(cos, -1.0, 1.0)
    return scores


def rank_bwe_agg(
    index: IndexedCollection,
    query: Query,
    space: EmbeddingSpace,
    weighting: Weighting = "add",
    depth: Optional[int] = None,
) -> RankedRun:
    """Rank by cosine with the query embedding built in `space`."""
    if space.dim != index.embedding_dim:
        raise ContractError(
            f"dimension mismatch: space {space.dim}, index {index.embedding_dim}"
        )
    scores = aggregation_scores(index, query_embedding(space, query.tokens), weighting)
    return RankedRun.from_scores(
        query.id, index.doc_ids, scores, index.doc_lex_rank, depth
    )


class BweAggRanker(Ranker):
    """Aggregated-embedding ranker over a shared space."""

    def __init__(
        self, index: IndexedCollection, space: EmbeddingSpace, weighting: Weighting
    ):
        self.index = index
        self.space = space
        self.weighting = weighting

    @property
    def name(self) -> str:
        return f"bwe-agg-{self.weighting}"

    def rank(self, query: Query, depth: Optional[int] = None) -> RankedRun:
        return rank_bwe_agg(self.index, query, self.space, self.weighting, depth)
