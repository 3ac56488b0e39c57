"""
Embedding Store
---------------
Loading, normalization and exact nearest-neighbour search over word
embedding spaces in the word2vec text format.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np

from .errors import ContractError, InputFormatError
from .utils import atomic_write_text, iter_lines

logger = logging.getLogger(__name__)

Metric = Literal["cosine", "csls"]

# Score given to a zero vector wherever a cosine is undefined.
COSINE_SENTINEL = -2.0
# Upper bound on one block of float64 similarities (rows x vocabulary).
BLOCK_BYTES = 128 * 1024 * 1024


@dataclass(frozen=True, eq=False)
class EmbeddingSpace:
    """Vocabulary-to-vector map for one language (or a shared space)."""

    lang: str
    vocab: Tuple[str, ...]
    vectors: np.ndarray
    normalized: bool = False
    duplicates: int = 0
    zero_count: int = 0
    index_of: Dict[str, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.vocab):
            raise ContractError(
                f"vectors shape {self.vectors.shape} does not match "
                f"vocabulary size {len(self.vocab)}"
            )
        if not self.index_of:
            object.__setattr__(
                self, "index_of", {term: i for i, term in enumerate(self.vocab)}
            )
        if len(self.index_of) != len(self.vocab):
            raise ContractError("vocabulary terms must be unique")
        self.vectors.setflags(write=False)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.vocab)

    def __contains__(self, term: object) -> bool:
        return term in self.index_of

    def vector(self, term: str) -> np.ndarray:
        """Return the vector of `term`; KeyError if it is out of vocabulary."""
        try:
            return self.vectors[self.index_of[term]]
        except KeyError:
            raise KeyError(f"'{term}' not in {self.lang} vocabulary") from None

    @cached_property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.vectors, axis=1)

    @cached_property
    def zero_mask(self) -> np.ndarray:
        return ~np.any(self.vectors != 0.0, axis=1)

    @cached_property
    def lex_rank(self) -> np.ndarray:
        """Position of each term in ascending lexicographic order."""
        order = sorted(range(len(self.vocab)), key=self.vocab.__getitem__)
        rank = np.empty(len(self.vocab), dtype=np.int64)
        rank[order] = np.arange(len(self.vocab))
        return rank


def _parse_vector(parts: Sequence[str], line_no: int) -> np.ndarray:
    try:
        vec = np.array([float(x) for x in parts], dtype=np.float64)
    except ValueError:
        raise InputFormatError(f"non-numeric value at line {line_no}") from None
    if not np.all(np.isfinite(vec)):
        raise InputFormatError(f"non-finite value at line {line_no}")
    return vec


def load_embeddings(
    path: Path,
    max_vocab: Optional[int] = None,
    expected_dim: Optional[int] = None,
    lang: Optional[str] = None,
) -> EmbeddingSpace:
    """
    Read a word2vec text file.

    The optional "V D" header is recognised when the first line holds exactly
    two integers. Duplicate terms keep their first occurrence and are counted.

    Raises:
        InputFormatError: on a dimension mismatch or non-finite value
            (message names the line), or on an empty file.
    """
    path = Path(path)
    if not path.exists():
        raise InputFormatError(f"vector file not found: {path}")
    if max_vocab is not None and max_vocab < 1:
        raise ContractError("max_vocab must be a positive integer")

    dim: Optional[int] = expected_dim
    terms: List[str] = []
    rows: List[np.ndarray] = []
    seen: set = set()
    duplicates = 0

    for line_no, line in iter_lines(path):
        parts = line.split()
        if not parts:
            continue
        if line_no == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
            header_dim = int(parts[1])
            if dim is not None and header_dim != dim:
                raise InputFormatError(
                    f"dimension mismatch at line 1: header declares {header_dim}, "
                    f"expected {dim}"
                )
            dim = header_dim
            continue
        if max_vocab is not None and len(terms) >= max_vocab:
            break
        term, values = parts[0], parts[1:]
        if dim is None:
            dim = len(values)
            if dim == 0:
                raise InputFormatError(f"no vector values at line {line_no}")
        if len(values) != dim:
            raise InputFormatError(f"dimension mismatch at line {line_no}")
        vec = _parse_vector(values, line_no)
        if term in seen:
            duplicates += 1
            continue
        seen.add(term)
        terms.append(term)
        rows.append(vec)

    if dim is None:
        raise InputFormatError(f"no vectors found in {path}")
    if duplicates:
        logger.warning(f"{path.name}: {duplicates} duplicate term(s) ignored")

    vectors = np.vstack(rows) if rows else np.zeros((0, dim), dtype=np.float64)
    logger.info(f"Loaded {len(terms)} vectors of dim {dim} from {path}")
    return EmbeddingSpace(
        lang=lang or path.stem,
        vocab=tuple(terms),
        vectors=vectors,
        normalized=False,
        duplicates=duplicates,
    )


def write_embeddings(space: EmbeddingSpace, path: Path) -> Path:
    """Write a space in the word2vec text format, header included."""
    lines = [f"{len(space)} {space.dim}"]
    for term, vec in zip(space.vocab, space.vectors):
        lines.append(term + " " + " ".join(f"{x:.17g}" for x in vec))
    return atomic_write_text(Path(path), "\n".join(lines) + "\n")


def normalize_space(space: EmbeddingSpace) -> EmbeddingSpace:
    """Scale every nonzero vector to unit length; zero vectors stay and are counted."""
    norms = space.norms
    zero = norms == 0.0
    safe = np.where(zero, 1.0, norms)
    vectors = space.vectors / safe[:, None]
    zero_count = int(zero.sum())
    if zero_count:
        logger.warning(f"{space.lang}: {zero_count} zero vector(s) left unnormalized")
    return replace(
        space,
        vectors=vectors,
        normalized=True,
        zero_count=zero_count,
        index_of=space.index_of,
    )


def cosine(u: Sequence[float], v: Sequence[float]) -> Optional[float]:
    """
    Cosine similarity clamped to [-1, 1].

    Returns None when either vector is zero; rankers turn that into
    COSINE_SENTINEL.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ContractError(f"vector length mismatch: {u.shape[0]} vs {v.shape[0]}")
    nu = math.sqrt(float(np.dot(u, u)))
    nv = math.sqrt(float(np.dot(v, v)))
    if nu == 0.0 or nv == 0.0:
        return None
    # u * v is elementwise, so cosine(u, v) == cosine(v, u) bit for bit
    value = float(np.sum(u * v)) / (nu * nv)
    return max(-1.0, min(1.0, value))


def cosine_matrix(queries: np.ndarray, space: EmbeddingSpace) -> np.ndarray:
    """Cosine of every query row against every vocabulary row.

    Pairs involving a zero vector get COSINE_SENTINEL.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    q_norms = np.linalg.norm(queries, axis=1)
    v_norms = space.norms
    q_zero = q_norms == 0.0
    v_zero = v_norms == 0.0
    sims = queries @ space.vectors.T
    # in place: the block is the only rows x vocabulary array held here
    sims /= np.where(q_zero, 1.0, q_norms)[:, None]
    sims /= np.where(v_zero, 1.0, v_norms)[None, :]
    np.clip(sims, -1.0, 1.0, out=sims)
    sims[q_zero, :] = COSINE_SENTINEL
    sims[:, v_zero] = COSINE_SENTINEL
    return sims


def _top_n_mean(sims: np.ndarray, n: int) -> np.ndarray:
    n = min(n, sims.shape[1])
    if n == 0:
        return np.zeros(sims.shape[0])
    top = np.partition(sims, sims.shape[1] - n, axis=1)[:, -n:]
    return top.mean(axis=1)


def csls_penalty(space: EmbeddingSpace, other: EmbeddingSpace, n: int) -> np.ndarray:
    """Mean cosine of each row of `space` to its n nearest neighbours in `other`."""
    if n < 1:
        raise ContractError("csls neighbourhood size must be >= 1")
    if space.dim != other.dim:
        raise ContractError(f"dimension mismatch: {space.dim} vs {other.dim}")
    out = np.empty(len(space), dtype=np.float64)
    for start, end in iter_blocks(len(space), len(other)):
        out[start:end] = _top_n_mean(cosine_matrix(space.vectors[start:end], other), n)
    return out


def select_top_k(
    scores: np.ndarray, lex_rank: np.ndarray, k: int
) -> np.ndarray:
    """
    Indices of the k best scores, descending, ties by ascending lex_rank.

    Partial selection finds the k-th score; every candidate tied with it
    is kept before the final exact sort so ties are never cut arbitrarily.
    """
    size = scores.shape[0]
    k = min(k, size)
    if k <= 0:
        return np.zeros(0, dtype=np.int64)
    if k < size:
        kth = np.partition(scores, size - k)[size - k]
        candidates = np.flatnonzero(scores >= kth)
    else:
        candidates = np.arange(size)
    order = np.lexsort((lex_rank[candidates], -scores[candidates]))
    return candidates[order][:k]


def similarity_scores(
    space: EmbeddingSpace,
    query_vecs: np.ndarray,
    metric: Metric = "cosine",
    csls_n: int = 10,
    source: Optional[EmbeddingSpace] = None,
    target_penalty: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Similarity of query rows (from `source` side) to every term of `space`."""
    sims = cosine_matrix(query_vecs, space)
    if metric == "cosine":
        return sims
    if metric != "csls":
        raise ContractError(f"unknown metric: {metric}")
    if target_penalty is None:
        if source is None:
            raise ContractError("csls needs the source space for neighbourhood terms")
        target_penalty = csls_penalty(space, source, csls_n)
    query_penalty = _top_n_mean(sims, csls_n)
    sims *= 2.0
    sims -= target_penalty[None, :]
    sims -= query_penalty[:, None]
    return sims


def nearest_neighbors(
    space: EmbeddingSpace,
    query_vec: Sequence[float],
    k: int,
    metric: Metric = "cosine",
    csls_n: int = 10,
    source: Optional[EmbeddingSpace] = None,
) -> List[Tuple[str, float]]:
    """
    Exact top-k neighbours of `query_vec` in `space`.

    For metric="csls", `source` is the space the query comes from; its
    vectors define the neighbourhood penalty of each candidate term.
    """
    query = np.asarray(query_vec, dtype=np.float64)
    if query.ndim != 1 or query.shape[0] != space.dim:
        raise ContractError(
            f"dimension mismatch: query has {query.shape[-1]}, space has {space.dim}"
        )
    if k <= 0 or len(space) == 0:
        return []
    if metric == "csls" and csls_n < 1:
        raise ContractError("csls neighbourhood size must be >= 1")
    scores = similarity_scores(space, query[None, :], metric, csls_n, source)[0]
    top = select_top_k(scores, space.lex_rank, k)
    return [(space.vocab[i], float(scores[i])) for i in top]


def best_matches(scores: np.ndarray, lex_rank: np.ndarray) -> np.ndarray:
    """Per-row argmax with ties resolved to the lexicographically smallest term."""
    if scores.shape[1] == 0:
        return np.zeros(scores.shape[0], dtype=np.int64)
    best = scores.argmax(axis=1)
    ties = scores == scores[np.arange(scores.shape[0]), best][:, None]
    for row in np.flatnonzero(ties.sum(axis=1) > 1):
        cols = np.flatnonzero(ties[row])
        best[row] = cols[np.argmin(lex_rank[cols])]
    return best


def block_rows(columns: int) -> int:
    """Rows per block so that rows x columns float64 stays within BLOCK_BYTES."""
    return max(1, BLOCK_BYTES // (8 * max(columns, 1)))


def iter_blocks(size: int, columns: int) -> Iterable[Tuple[int, int]]:
    """(start, end) row ranges of a size x columns similarity computation."""
    step = block_rows(columns)
    for start in range(0, size, step):
        yield start, min(start + step, size)
