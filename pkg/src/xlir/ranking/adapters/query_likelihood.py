"""
Query-likelihood rankers with Dirichlet smoothing: the monolingual
baseline (lm-uni) and term-by-term query translation (tbt-qt).
"""
import logging
import math
from collections import Counter
from dataclasses import replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ...config import DEFAULT_MU
from ...corpus_index import IndexedCollection
from ...embedding_store import EmbeddingSpace, nearest_neighbors
from ...errors import ContractError
from ..base import Query, RankedRun, Ranker

logger = logging.getLogger(__name__)


def scorable_terms(
    index: IndexedCollection, tokens: Sequence[str]
) -> Tuple[List[str], List[str]]:
    """Split query tokens into those seen in the collection and those with cf = 0."""
    scorable = [t for t in tokens if index.cf.get(t, 0) > 0]
    skipped = [t for t in tokens if index.cf.get(t, 0) == 0]
    return scorable, skipped


def score_lm_dirichlet(
    index: IndexedCollection,
    doc: str,
    query_tokens: Sequence[str],
    mu: float = DEFAULT_MU,
) -> float:
    """
    Log query likelihood of one document under Dirichlet smoothing.

    Sum over scorable tokens of ln(λ·P(t|d) + (1-λ)·P(t|D)) with
    λ = N_d / (N_d + mu). Tokens absent from the collection are skipped;
    an empty document scores -inf.
    """
    if mu <= 0:
        raise ContractError("mu must be > 0")
    position = index.doc_position[doc]
    n_d = index.docs[position].length
    if n_d == 0:
        return float("-inf")
    lam = n_d / (n_d + mu)
    counts = index.tf[position]
    scorable, _ = scorable_terms(index, query_tokens)
    score = 0.0
    for term in scorable:
        p_doc = counts.get(term, 0) / n_d
        p_coll = index.cf[term] / index.total_tokens
        score += math.log(lam * p_doc + (1.0 - lam) * p_coll)
    return score


def dirichlet_scores(
    index: IndexedCollection, query_tokens: Sequence[str], mu: float = DEFAULT_MU
) -> Tuple[np.ndarray, List[str]]:
    """score_lm_dirichlet for every document at once, plus the skipped tokens."""
    if mu <= 0:
        raise ContractError("mu must be > 0")
    lengths = index.doc_lengths
    empty = lengths == 0
    lam = lengths / (lengths + mu)
    safe_lengths = np.where(empty, 1.0, lengths)
    scorable, skipped = scorable_terms(index, query_tokens)

    scores = np.zeros(index.doc_count, dtype=np.float64)
    for term, count in sorted(Counter(scorable).items()):
        tf = np.zeros(index.doc_count, dtype=np.float64)
        for position, freq in index.postings[term].items():
            tf[position] = freq
        p_doc = tf / safe_lengths
        p_coll = index.cf[term] / index.total_tokens
        scores += count * np.log(lam * p_doc + (1.0 - lam) * p_coll)
    scores[empty] = -np.inf
    return scores, skipped


def rank_lm_uni(
    index: IndexedCollection,
    query: Query,
    mu: float = DEFAULT_MU,
    depth: Optional[int] = None,
) -> RankedRun:
    """Query likelihood on the untranslated query tokens."""
    scores, skipped = dirichlet_scores(index, query.tokens, mu)
    if skipped:
        logger.debug(f"query {query.id}: {len(skipped)} token(s) absent from collection")
    return RankedRun.from_scores(query.id, index.doc_ids, scores, index.doc_lex_rank, depth)


def translate_query(
    query: Query,
    src_space: EmbeddingSpace,
    tgt_space: EmbeddingSpace,
    cache: Optional[Dict[str, str]] = None,
) -> Query:
    """
    Replace each in-vocabulary token by its cosine 1-NN in the target space.

    Tokens outside the source vocabulary, and tokens whose source vector is
    zero (no defined neighbour), are kept as they are and counted in
    retained_oov.
    """
    if src_space.dim != tgt_space.dim:
        raise ContractError(
            f"dimension mismatch: source {src_space.dim}, target {tgt_space.dim}"
        )
    cache = {} if cache is None else cache
    translated: List[str] = []
    retained = 0
    for token in query.tokens:
        if token not in src_space or src_space.zero_mask[src_space.index_of[token]]:
            translated.append(token)
            retained += 1
            continue
        if token not in cache:
            neighbours = nearest_neighbors(tgt_space, src_space.vector(token), k=1)
            cache[token] = neighbours[0][0] if neighbours else token
        translated.append(cache[token])
    return replace(query, translated_tokens=tuple(translated), retained_oov=retained)


def rank_tbt_qt(
    index: IndexedCollection,
    query: Query,
    src_space: EmbeddingSpace,
    tgt_space: EmbeddingSpace,
    mu: float = DEFAULT_MU,
    depth: Optional[int] = None,
    cache: Optional[Dict[str, str]] = None,
) -> RankedRun:
    """Translate term by term, then rank with query likelihood."""
    translated = translate_query(query, src_space, tgt_space, cache)
    logger.debug(f"query {query.id}: {query.tokens} -> {translated.translated_tokens}")
    scores, _ = dirichlet_scores(index, translated.translated_tokens, mu)
    return RankedRun.from_scores(query.id, index.doc_ids, scores, index.doc_lex_rank, depth)


class LmUniRanker(Ranker):
    """Monolingual query-likelihood baseline."""

    def __init__(self, index: IndexedCollection, mu: float = DEFAULT_MU):
        self.index = index
        self.mu = mu

    @property
    def name(self) -> str:
        return "lm-uni"

    def rank(self, query: Query, depth: Optional[int] = None) -> RankedRun:
        return rank_lm_uni(self.index, query, self.mu, depth)


class TbtQtRanker(Ranker):
    """Term-by-term translation followed by query likelihood."""

    def __init__(
        self,
        index: IndexedCollection,
        src_space: EmbeddingSpace,
        tgt_space: EmbeddingSpace,
        mu: float = DEFAULT_MU,
    ):
        self.index = index
        self.src_space = src_space
        self.tgt_space = tgt_space
        self.mu = mu
        self._translations: Dict[str, str] = {}

    @property
    def name(self) -> str:
        return "tbt-qt"

    def rank(self, query: Query, depth: Optional[int] = None) -> RankedRun:
        return rank_tbt_qt(
            self.index,
            query,
            self.src_space,
            self.tgt_space,
            self.mu,
            depth,
            self._translations,
        )
