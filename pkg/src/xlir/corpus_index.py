"""
Corpus Index
------------
Preprocessing and collection statistics for both ranking families:
term counts for the query-likelihood models and summed document
embeddings for the aggregation models.
"""
import json
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from .config import INDEX_FORMAT_VERSION
from .embedding_store import EmbeddingSpace
from .errors import ContractError, InputFormatError
from .utils import atomic_write_text, iter_lines, write_jsonl

logger = logging.getLogger(__name__)

# maximal runs of Unicode letters or digits
TOKEN_PATTERN = re.compile(r"[^\W_]+")

MANIFEST_FILE = "manifest.yaml"
DOCUMENTS_FILE = "documents.jsonl"
VECTORS_FILE = "doc_vectors.npz"


def preprocess(text: str, stopwords: FrozenSet[str] = frozenset()) -> List[str]:
    """Case-fold, split on anything that is not a letter or digit, drop
    one-character tokens and stopwords.

    str.casefold applies full folding, so "ß" becomes "ss" and final sigma
    matches "σ".
    """
    return [
        token
        for token in TOKEN_PATTERN.findall(text.casefold())
        if len(token) > 1 and token not in stopwords
    ]


def load_stopwords(path: Optional[Path]) -> FrozenSet[str]:
    """One stopword per line; blank lines and '#' comments are ignored."""
    if path is None:
        return frozenset()
    path = Path(path)
    if not path.exists():
        raise InputFormatError(f"stopword file not found: {path}")
    words = set()
    for _, line in iter_lines(path):
        word = line.strip().casefold()
        if word and not word.startswith("#"):
            words.add(word)
    logger.info(f"Loaded {len(words)} stopwords from {path}")
    return frozenset(words)


def read_collection(path: Path) -> Iterator[Tuple[str, str]]:
    """Stream (id, text) pairs from a JSONL collection."""
    path = Path(path)
    if not path.exists():
        raise InputFormatError(f"collection file not found: {path}")
    for line_no, line in iter_lines(path):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise InputFormatError(f"{path.name}: invalid JSON at line {line_no}: {e}") from None
        if (
            not isinstance(record, dict)
            or not isinstance(record.get("id"), str)
            or not isinstance(record.get("text"), str)
        ):
            raise InputFormatError(
                f"{path.name}: line {line_no} needs string fields 'id' and 'text'"
            )
        yield record["id"], record["text"]


@dataclass(frozen=True)
class Document:
    id: str
    tokens: Tuple[str, ...]

    @property
    def length(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class TermStatistics:
    """Counting statistics of a tokenized collection."""

    tf: Tuple[Counter, ...]
    df: Dict[str, int]
    cf: Dict[str, int]
    postings: Dict[str, Dict[int, int]]
    total_tokens: int
    idf: Dict[str, float]


@dataclass(frozen=True, eq=False)
class IndexedCollection:
    """
    Term statistics and document embeddings of one collection.

    Language-model statistics cover every preprocessed token; the document
    embeddings only cover tokens found in the embedding space. The vector
    arrays are copied and held read-only.
    """

    docs: Tuple[Document, ...]
    doc_vec_add: np.ndarray
    doc_vec_idf: np.ndarray
    oov_doc_terms: int
    stats: Optional[TermStatistics] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.stats is None:
            object.__setattr__(self, "stats", compute_statistics(self.docs))
        for name in ("doc_vec_add", "doc_vec_idf"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def tf(self) -> Tuple[Counter, ...]:
        return self.stats.tf

    @property
    def df(self) -> Dict[str, int]:
        return self.stats.df

    @property
    def cf(self) -> Dict[str, int]:
        return self.stats.cf

    @property
    def idf(self) -> Dict[str, float]:
        return self.stats.idf

    @property
    def postings(self) -> Dict[str, Dict[int, int]]:
        return self.stats.postings

    @property
    def total_tokens(self) -> int:
        return self.stats.total_tokens

    @property
    def doc_count(self) -> int:
        return len(self.docs)

    @property
    def embedding_dim(self) -> int:
        return int(self.doc_vec_add.shape[1])

    @cached_property
    def doc_ids(self) -> Tuple[str, ...]:
        return tuple(doc.id for doc in self.docs)

    @cached_property
    def doc_position(self) -> Dict[str, int]:
        return {doc_id: i for i, doc_id in enumerate(self.doc_ids)}

    @cached_property
    def doc_lengths(self) -> np.ndarray:
        return np.array([doc.length for doc in self.docs], dtype=np.float64)

    @cached_property
    def doc_lex_rank(self) -> np.ndarray:
        """Position of each doc id in ascending order, for tie-breaking."""
        order = sorted(range(len(self.docs)), key=self.doc_ids.__getitem__)
        rank = np.empty(len(self.docs), dtype=np.int64)
        rank[order] = np.arange(len(self.docs))
        return rank

    @property
    def doc_zero_add(self) -> np.ndarray:
        return ~np.any(self.doc_vec_add != 0.0, axis=1)

    @property
    def doc_zero_idf(self) -> np.ndarray:
        return ~np.any(self.doc_vec_idf != 0.0, axis=1)

    def collection_probability(self, term: str) -> float:
        """P(t|D) = cf(t) / total_tokens."""
        if self.total_tokens == 0:
            return 0.0
        return self.cf.get(term, 0) / self.total_tokens


def compute_statistics(docs: Sequence[Document]) -> TermStatistics:
    """Per-document tf, df, cf, postings, total token count and IDF = ln(N / df)."""
    tf = tuple(Counter(doc.tokens) for doc in docs)
    df: Counter = Counter()
    cf: Counter = Counter()
    postings: Dict[str, Dict[int, int]] = {}
    for position, counts in enumerate(tf):
        df.update(counts.keys())
        cf.update(counts)
        for term, count in counts.items():
            postings.setdefault(term, {})[position] = count
    total = sum(len(doc.tokens) for doc in docs)
    n = len(docs)
    idf = {t: math.log(n / d) for t, d in df.items()}
    return TermStatistics(tf, dict(df), dict(cf), postings, total, idf)


def _aggregate(
    counts: Counter, space: EmbeddingSpace, idf: Dict[str, float]
) -> Tuple[np.ndarray, np.ndarray, int]:
    """Sum of term vectors (multiplicity counts) plain and IDF-weighted."""
    vec_add = np.zeros(space.dim, dtype=np.float64)
    vec_idf = np.zeros(space.dim, dtype=np.float64)
    skipped = 0
    # sorted terms fix the summation order independent of ingestion order
    for term in sorted(counts):
        count = counts[term]
        if term not in space:
            skipped += count
            continue
        vec = space.vectors[space.index_of[term]]
        vec_add += count * vec
        vec_idf += (count * idf[term]) * vec
    return vec_add, vec_idf, skipped


def build_index(
    collection: Iterable[Tuple[str, str]],
    space: EmbeddingSpace,
    stopwords: FrozenSet[str] = frozenset(),
) -> IndexedCollection:
    """
    Preprocess every document and compute all ranking statistics.

    Raises:
        InputFormatError: on a duplicate document id or an empty collection.
    """
    if not space.normalized:
        logger.warning("build_index on an unnormalized embedding space")
    docs: List[Document] = []
    seen = set()
    for doc_id, text in collection:
        if doc_id in seen:
            raise InputFormatError(f"duplicate document id: {doc_id}")
        seen.add(doc_id)
        docs.append(Document(doc_id, tuple(preprocess(text, stopwords))))
    if not docs:
        raise InputFormatError("empty collection")

    stats = compute_statistics(docs)
    n = len(docs)

    doc_vec_add = np.zeros((n, space.dim), dtype=np.float64)
    doc_vec_idf = np.zeros((n, space.dim), dtype=np.float64)
    oov = 0
    for position, counts in enumerate(stats.tf):
        doc_vec_add[position], doc_vec_idf[position], skipped = _aggregate(
            counts, space, stats.idf
        )
        oov += skipped

    index = IndexedCollection(
        docs=tuple(docs),
        doc_vec_add=doc_vec_add,
        doc_vec_idf=doc_vec_idf,
        oov_doc_terms=oov,
        stats=stats,
    )
    zero_docs = int(index.doc_zero_add.sum())
    if zero_docs:
        logger.warning(f"{zero_docs} document(s) have no in-vocabulary token")
    logger.info(
        f"Indexed {index.doc_count} documents, {index.total_tokens} tokens, "
        f"{len(index.df)} terms, {oov} tokens outside the embedding vocabulary"
    )
    return index


def query_embedding(space: EmbeddingSpace, query_tokens: Sequence[str]) -> np.ndarray:
    """Unweighted sum of in-vocabulary query token vectors; zero if none."""
    vec = np.zeros(space.dim, dtype=np.float64)
    missing = 0
    for token in query_tokens:
        if token in space:
            vec += space.vectors[space.index_of[token]]
        else:
            missing += 1
    if missing == len(query_tokens):
        logger.debug("query has no in-vocabulary token, embedding is zero")
    return vec


def save_index(index: IndexedCollection, directory: Path) -> Path:
    """Persist an index as manifest.yaml, documents.jsonl and doc_vectors.npz."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_jsonl(
        [{"id": doc.id, "tokens": list(doc.tokens)} for doc in index.docs],
        directory / DOCUMENTS_FILE,
    )

    tmp_vectors = directory / f".{VECTORS_FILE}.tmp"
    with open(tmp_vectors, "wb") as f:
        np.savez(f, doc_vec_add=index.doc_vec_add, doc_vec_idf=index.doc_vec_idf)
    tmp_vectors.replace(directory / VECTORS_FILE)

    manifest = {
        "format_version": INDEX_FORMAT_VERSION,
        "doc_count": index.doc_count,
        "total_tokens": index.total_tokens,
        "embedding_dim": index.embedding_dim,
        "oov_doc_terms": index.oov_doc_terms,
        "vocabulary_size": len(index.df),
    }
    atomic_write_text(directory / MANIFEST_FILE, yaml.safe_dump(manifest, sort_keys=True))
    logger.info(f"Saved index to {directory}")
    return directory


def load_index(directory: Path) -> IndexedCollection:
    """Load an index written by save_index; statistics are recounted from tokens."""
    directory = Path(directory)
    manifest_path = directory / MANIFEST_FILE
    if not manifest_path.exists():
        raise InputFormatError(f"no index manifest in {directory}")
    try:
        with open(manifest_path, "r", encoding="utf-8") as f:
            manifest = yaml.safe_load(f) or {}
    except (yaml.YAMLError, UnicodeDecodeError) as e:
        raise InputFormatError(f"unreadable index manifest in {directory}: {e}") from None
    if not isinstance(manifest, dict):
        raise InputFormatError(f"unreadable index manifest in {directory}")
    version = manifest.get("format_version")
    if version != INDEX_FORMAT_VERSION:
        raise InputFormatError(
            f"index format version {version} is not supported "
            f"(expected {INDEX_FORMAT_VERSION})"
        )

    docs: List[Document] = []
    for line_no, line in iter_lines(directory / DOCUMENTS_FILE):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            docs.append(Document(record["id"], tuple(record["tokens"])))
        except (json.JSONDecodeError, KeyError, TypeError):
            raise InputFormatError(f"{DOCUMENTS_FILE}: bad record at line {line_no}") from None

    vectors_path = directory / VECTORS_FILE
    if not vectors_path.exists():
        raise InputFormatError(f"index in {directory} has no {VECTORS_FILE}")
    try:
        with np.load(vectors_path) as data:
            doc_vec_add = np.array(data["doc_vec_add"], dtype=np.float64)
            doc_vec_idf = np.array(data["doc_vec_idf"], dtype=np.float64)
    except (OSError, ValueError, KeyError) as e:
        raise InputFormatError(f"unreadable {VECTORS_FILE} in {directory}: {e}") from None

    if len(docs) != manifest["doc_count"] or doc_vec_add.shape[0] != len(docs):
        raise InputFormatError(f"index in {directory} is inconsistent with its manifest")

    index = IndexedCollection(
        docs=tuple(docs),
        doc_vec_add=doc_vec_add,
        doc_vec_idf=doc_vec_idf,
        oov_doc_terms=int(manifest["oov_doc_terms"]),
    )
    if index.total_tokens != manifest["total_tokens"]:
        raise ContractError(f"index in {directory}: token count differs from manifest")
    logger.info(f"Loaded index with {index.doc_count} documents from {directory}")
    return index
