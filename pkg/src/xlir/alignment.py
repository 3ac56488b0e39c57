"""
Alignment
---------
Orthogonal mappings between two embedding spaces: seed dictionaries,
Procrustes fitting, mutual nearest-neighbour dictionary extraction and
bilingual lexicon induction scores.
"""
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Literal, Optional, Set, Tuple

import numpy as np
from scipy.linalg import orthogonal_procrustes

from .embedding_store import (
    EmbeddingSpace,
    Metric,
    best_matches,
    csls_penalty,
    iter_blocks,
    normalize_space,
    select_top_k,
    similarity_scores,
)
from .errors import ContractError, InputFormatError
from .utils import atomic_write_text, iter_lines

logger = logging.getLogger(__name__)

ORTHOGONALITY_TOLERANCE = 1e-5

Provenance = Literal["file", "mutual_nn"]


@dataclass(frozen=True)
class SeedDictionary:
    """Word translation pairs, optionally many targets per source term."""

    pairs: Tuple[Tuple[str, str], ...]
    provenance: Provenance = "file"
    duplicates: int = 0
    scores: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if len(set(self.pairs)) != len(self.pairs):
            raise ContractError("dictionary contains duplicate pairs")

    def __len__(self) -> int:
        return len(self.pairs)

    @classmethod
    def from_pairs(
        cls, pairs: List[Tuple[str, str]], provenance: Provenance = "file"
    ) -> "SeedDictionary":
        """Build a dictionary, dropping repeated pairs but keeping first-seen order."""
        unique = list(dict.fromkeys(pairs))
        return cls(tuple(unique), provenance, duplicates=len(pairs) - len(unique))

    def targets_by_source(self) -> Dict[str, Set[str]]:
        grouped: Dict[str, Set[str]] = {}
        for src, tgt in self.pairs:
            grouped.setdefault(src, set()).add(tgt)
        return grouped


@dataclass(frozen=True, eq=False)
class AlignmentMap:
    """Orthogonal W mapping source row vectors into the target space (x W)."""

    W: np.ndarray
    source_lang: str
    target_lang: str
    fitted_on: int
    warnings: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def dim(self) -> int:
        return int(self.W.shape[0])

    def orthogonality_error(self) -> float:
        """max |WᵀW - I|"""
        return float(np.max(np.abs(self.W.T @ self.W - np.eye(self.dim))))


def load_dictionary(path: Path) -> SeedDictionary:
    """
    Read "source<TAB or space>target" lines.

    Raises:
        InputFormatError: if a non-blank line does not hold exactly two fields.
    """
    path = Path(path)
    if not path.exists():
        raise InputFormatError(f"dictionary file not found: {path}")
    pairs: List[Tuple[str, str]] = []
    for line_no, line in iter_lines(path):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 2:
            raise InputFormatError(
                f"{path.name}: expected 2 fields at line {line_no}, got {len(parts)}"
            )
        pairs.append((parts[0], parts[1]))
    dictionary = SeedDictionary.from_pairs(pairs, "file")
    if dictionary.duplicates:
        logger.warning(f"{path.name}: {dictionary.duplicates} duplicate pair(s) dropped")
    logger.info(f"Loaded {len(dictionary)} dictionary pairs from {path}")
    return dictionary


def restrict_dictionary(
    dictionary: SeedDictionary, source: EmbeddingSpace, target: EmbeddingSpace
) -> Tuple[List[Tuple[str, str]], int]:
    """Pairs with both terms in vocabulary, and the number left out."""
    usable = [(s, t) for s, t in dictionary.pairs if s in source and t in target]
    return usable, len(dictionary) - len(usable)


def _check_pair(source: EmbeddingSpace, target: EmbeddingSpace) -> None:
    if source.dim != target.dim:
        raise ContractError(
            f"source and target dimensionality differ ({source.dim} vs {target.dim})"
        )


def procrustes_fit(
    source: EmbeddingSpace,
    target: EmbeddingSpace,
    dictionary: SeedDictionary,
    center: bool = False,
) -> AlignmentMap:
    """
    Fit W = U Vᵀ from the SVD of XᵀY over the usable dictionary pairs.

    W minimizes ||XW - Y||_F over orthogonal matrices. Fewer usable pairs
    than dimensions still gives an orthogonal W; the shortfall is recorded
    in the map's warnings.
    """
    _check_pair(source, target)
    if not (source.normalized and target.normalized):
        logger.warning("procrustes_fit on unnormalized spaces")
    usable, skipped = restrict_dictionary(dictionary, source, target)
    if not usable:
        raise ContractError("no usable pairs: no dictionary pair is in both vocabularies")
    if skipped:
        logger.info(f"{skipped} dictionary pair(s) out of vocabulary, {len(usable)} usable")

    X = source.vectors[[source.index_of[s] for s, _ in usable]]
    Y = target.vectors[[target.index_of[t] for _, t in usable]]
    if center:
        X = X - X.mean(axis=0)
        Y = Y - Y.mean(axis=0)

    warnings: List[str] = []
    if len(usable) < source.dim:
        msg = f"only {len(usable)} usable pairs for dimension {source.dim}"
        logger.warning(msg)
        warnings.append(msg)

    W, _ = orthogonal_procrustes(X, Y)
    alignment = AlignmentMap(
        W=W,
        source_lang=source.lang,
        target_lang=target.lang,
        fitted_on=len(usable),
        warnings=tuple(warnings),
    )
    logger.info(
        f"Fitted {source.dim}x{source.dim} map on {len(usable)} pairs "
        f"(orthogonality error {alignment.orthogonality_error():.2e})"
    )
    return alignment


def apply_alignment(space: EmbeddingSpace, alignment: AlignmentMap) -> EmbeddingSpace:
    """Project every vector by x W, renormalize and tag the space source→target."""
    if space.dim != alignment.dim:
        raise ContractError(
            f"dimension mismatch: space has {space.dim}, map has {alignment.dim}"
        )
    projected = replace(
        space,
        lang=f"{space.lang}→{alignment.target_lang}",
        vectors=space.vectors @ alignment.W,
        normalized=False,
        index_of=space.index_of,
    )
    return normalize_space(projected)


def _forward_best(
    queries: EmbeddingSpace,
    candidates: EmbeddingSpace,
    metric: Metric,
    csls_n: int,
    candidate_penalty: Optional[np.ndarray],
) -> Tuple[np.ndarray, np.ndarray]:
    best = np.empty(len(queries), dtype=np.int64)
    best_score = np.empty(len(queries), dtype=np.float64)
    lex_rank = candidates.lex_rank
    for start, end in iter_blocks(len(queries), len(candidates)):
        scores = similarity_scores(
            candidates,
            queries.vectors[start:end],
            metric,
            csls_n,
            target_penalty=candidate_penalty,
        )
        idx = best_matches(scores, lex_rank)
        best[start:end] = idx
        best_score[start:end] = scores[np.arange(end - start), idx]
    return best, best_score


def mutual_nn_dictionary(
    source: EmbeddingSpace,
    target: EmbeddingSpace,
    metric: Metric = "cosine",
    csls_n: int = 10,
    max_pairs: Optional[int] = None,
) -> SeedDictionary:
    """
    Pairs (s, t) where t is s's 1-NN in target and s is t's 1-NN in source.

    Sorted by descending similarity, then source and target term.
    """
    _check_pair(source, target)
    if len(source) == 0 or len(target) == 0:
        return SeedDictionary((), "mutual_nn")

    target_penalty = source_penalty = None
    if metric == "csls":
        target_penalty = csls_penalty(target, source, csls_n)
        source_penalty = csls_penalty(source, target, csls_n)

    fwd, fwd_score = _forward_best(source, target, metric, csls_n, target_penalty)
    bwd, _ = _forward_best(target, source, metric, csls_n, source_penalty)

    mutual = [
        (float(fwd_score[s]), source.vocab[s], target.vocab[t])
        for s, t in enumerate(fwd)
        if bwd[t] == s
    ]
    mutual.sort(key=lambda item: (-item[0], item[1], item[2]))
    if max_pairs is not None:
        mutual = mutual[:max_pairs]
    logger.info(f"Extracted {len(mutual)} mutual nearest-neighbour pairs ({metric})")
    return SeedDictionary(
        pairs=tuple((s, t) for _, s, t in mutual),
        provenance="mutual_nn",
        scores=tuple(score for score, _, _ in mutual),
    )


@dataclass(frozen=True)
class BliReport:
    """Precision@k of lexicon induction and the counts behind it."""

    precision: float
    k: int
    evaluated: int
    correct: int
    skipped_oov: int


def evaluate_bli(
    source: EmbeddingSpace,
    target: EmbeddingSpace,
    test_pairs: SeedDictionary,
    k: int = 1,
    metric: Metric = "cosine",
    csls_n: int = 10,
) -> BliReport:
    """
    Fraction of test source terms with a gold target among their top-k neighbours.

    A source term counts when it is in the source vocabulary and at least one
    of its gold targets is in the target vocabulary; others are reported in
    `skipped_oov`.
    """
    if k < 1:
        raise ContractError("k must be >= 1")
    _check_pair(source, target)

    gold: Dict[str, Set[int]] = {}
    skipped: Set[str] = set()
    for src, tgts in test_pairs.targets_by_source().items():
        in_vocab = {target.index_of[t] for t in tgts if t in target}
        if src in source and in_vocab:
            gold[src] = in_vocab
        else:
            skipped.add(src)
    if not gold:
        raise ContractError("no usable pairs in the test dictionary")

    terms = sorted(gold)
    queries = source.vectors[[source.index_of[s] for s in terms]]
    target_penalty = None
    if metric == "csls":
        target_penalty = csls_penalty(target, source, csls_n)

    lex_rank = target.lex_rank
    correct = 0
    for start, end in iter_blocks(len(terms), len(target)):
        scores = similarity_scores(
            target, queries[start:end], metric, csls_n, target_penalty=target_penalty
        )
        for row, term in enumerate(terms[start:end]):
            top = select_top_k(scores[row], lex_rank, k)
            if gold[term].intersection(top.tolist()):
                correct += 1

    report = BliReport(
        precision=correct / len(terms),
        k=k,
        evaluated=len(terms),
        correct=correct,
        skipped_oov=len(skipped),
    )
    logger.info(
        f"BLI P@{k} = {report.precision:.4f} "
        f"({correct}/{len(terms)}, {len(skipped)} skipped as OOV)"
    )
    return report


def refine(
    source: EmbeddingSpace,
    target: EmbeddingSpace,
    alignment: AlignmentMap,
    iters: int = 1,
    metric: Metric = "cosine",
    csls_n: int = 10,
    max_pairs: Optional[int] = None,
    center: bool = False,
) -> Tuple[AlignmentMap, List[int]]:
    """
    Alternate mutual-NN dictionary extraction and refitting `iters` times.

    `source` is the unaligned space; each round projects it with the current
    map. Returns the final map and the dictionary size of every round.
    """
    sizes: List[int] = []
    for round_no in range(1, iters + 1):
        projected = apply_alignment(source, alignment)
        synthetic = mutual_nn_dictionary(projected, target, metric, csls_n, max_pairs)
        sizes.append(len(synthetic))
        if not synthetic.pairs:
            logger.warning(f"Refinement round {round_no}: empty dictionary, stopping")
            break
        alignment = procrustes_fit(source, target, synthetic, center=center)
        logger.info(f"Refinement round {round_no}: refit on {len(synthetic)} pairs")
    return alignment, sizes


def save_alignment(alignment: AlignmentMap, path: Path) -> Path:
    """Write the map as metadata comments, a dimension line and D rows of D reals."""
    lines = [
        f"# source_lang={alignment.source_lang}",
        f"# target_lang={alignment.target_lang}",
        f"# fitted_on={alignment.fitted_on}",
        str(alignment.dim),
    ]
    for row in alignment.W:
        lines.append(" ".join(f"{x:.17g}" for x in row))
    return atomic_write_text(Path(path), "\n".join(lines) + "\n")


def load_alignment(path: Path) -> AlignmentMap:
    """Read a map written by save_alignment."""
    path = Path(path)
    if not path.exists():
        raise InputFormatError(f"alignment file not found: {path}")
    meta: Dict[str, str] = {}
    dim: Optional[int] = None
    rows: List[List[float]] = []
    for line_no, line in iter_lines(path):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            key, _, value = stripped.lstrip("# ").partition("=")
            meta[key.strip()] = value.strip()
            continue
        try:
            if dim is None:
                dim = int(stripped)
                continue
            row = [float(x) for x in stripped.split()]
        except ValueError:
            raise InputFormatError(f"{path.name}: bad number at line {line_no}") from None
        if len(row) != dim:
            raise InputFormatError(f"{path.name}: dimension mismatch at line {line_no}")
        rows.append(row)
    if dim is None or len(rows) != dim:
        raise InputFormatError(f"{path.name}: expected {dim} matrix rows, got {len(rows)}")

    alignment = AlignmentMap(
        W=np.array(rows, dtype=np.float64),
        source_lang=meta.get("source_lang", "src"),
        target_lang=meta.get("target_lang", "tgt"),
        fitted_on=int(meta.get("fitted_on", 0)),
    )
    if alignment.orthogonality_error() > ORTHOGONALITY_TOLERANCE:
        raise ContractError(f"{path.name}: matrix is not orthogonal")
    return alignment
