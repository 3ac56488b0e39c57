import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
project_root = Path(__file__).parent.parent.parent
sys.path.append(str(project_root))

from src.xlir.embedding_store import (
    BLOCK_BYTES,
    COSINE_SENTINEL,
    best_matches,
    block_rows,
    cosine,
    cosine_matrix,
    iter_blocks,
    load_embeddings,
    nearest_neighbors,
    normalize_space,
    select_top_k,
)
from src.xlir.errors import ContractError, InputFormatError

from conftest import make_space


def write(tmp_path, text, name="vectors.vec"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_load_with_header(tmp_path):
    path = write(tmp_path, "3 2\nhuis 1 0\nhond 0 1\nkat 0.5 0.5\n")
    space = load_embeddings(path, lang="nl")

    assert space.vocab == ("huis", "hond", "kat")
    assert space.dim == 2
    assert space.lang == "nl"
    assert not space.normalized
    np.testing.assert_array_equal(space.vector("kat"), [0.5, 0.5])


def test_load_without_header_infers_dimension(tmp_path):
    path = write(tmp_path, "house 1 2 3\ndog 4 5 6\r\n")
    space = load_embeddings(path)
    assert len(space) == 2
    assert space.dim == 3


def test_header_only_recognised_on_first_line(tmp_path):
    # "10 20" on line 2 is a term with a one-value vector, which mismatches dim 2
    path = write(tmp_path, "house 1 2\n10 20\n")
    with pytest.raises(InputFormatError, match="line 2"):
        load_embeddings(path)


def test_dimension_mismatch_names_line(tmp_path):
    path = write(tmp_path, "2 3\nhouse 1 2 3\ndog 4 5\n")
    with pytest.raises(InputFormatError, match="dimension mismatch at line 3"):
        load_embeddings(path)


def test_non_finite_value_rejected(tmp_path):
    path = write(tmp_path, "house 1 nan\n")
    with pytest.raises(InputFormatError, match="non-finite"):
        load_embeddings(path)


def test_duplicates_keep_first_occurrence(tmp_path):
    path = write(tmp_path, "house 1 0\ndog 0 1\nhouse 5 5\n")
    space = load_embeddings(path)
    assert space.vocab == ("house", "dog")
    assert space.duplicates == 1
    np.testing.assert_array_equal(space.vector("house"), [1, 0])


def test_max_vocab_keeps_first_rows(tmp_path):
    path = write(tmp_path, "a1 1 0\nb2 0 1\nc3 1 1\n")
    space = load_embeddings(path, max_vocab=2)
    assert space.vocab == ("a1", "b2")


def test_normalize_leaves_zero_vectors(tmp_path):
    space = make_space(["aa", "bb", "cc"], [[3, 4], [0, 0], [0, 2]], normalize=False)
    normalized = normalize_space(space)

    assert normalized.normalized
    assert normalized.zero_count == 1
    assert normalized.zero_mask.tolist() == [False, True, False]
    np.testing.assert_allclose(normalized.vector("aa"), [0.6, 0.8])
    np.testing.assert_array_equal(normalized.vector("bb"), [0, 0])
    assert normalized.norms[0] == pytest.approx(1.0)


def test_cosine_values():
    assert cosine([1, 2], [2, 1]) == pytest.approx(0.8)
    assert cosine([1, 0], [-1, 0]) == -1.0
    assert cosine([0, 0], [1, 1]) is None


def test_cosine_is_symmetric_bit_for_bit(rng):
    for _ in range(20):
        u, v = rng.normal(size=7), rng.normal(size=7)
        assert cosine(u, v) == cosine(v, u)


def test_cosine_length_mismatch():
    with pytest.raises(ContractError):
        cosine([1, 2, 3], [1, 2])


def test_cosine_matrix_sentinel_for_zero_rows():
    space = make_space(["aa", "bb"], [[1, 0], [0, 0]])
    sims = cosine_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]), space)
    assert sims[0, 0] == pytest.approx(1.0)
    assert sims[0, 1] == COSINE_SENTINEL
    assert np.all(sims[1] == COSINE_SENTINEL)


def test_nearest_neighbors_breaks_ties_lexicographically():
    space = make_space(["zeta", "alpha", "mid"], [[1, 0], [1, 0], [0, 1]])
    result = nearest_neighbors(space, [2.0, 0.0], k=2)
    assert [term for term, _ in result] == ["alpha", "zeta"]
    assert result[0][1] == pytest.approx(1.0)


def test_nearest_neighbors_k_larger_than_vocabulary():
    space = make_space(["aa", "bb"], [[1, 0], [0, 1]])
    assert len(nearest_neighbors(space, [1.0, 1.0], k=10)) == 2
    assert nearest_neighbors(space, [1.0, 1.0], k=0) == []


def test_nearest_neighbors_dimension_mismatch():
    space = make_space(["aa"], [[1, 0]])
    with pytest.raises(ContractError, match="dimension mismatch"):
        nearest_neighbors(space, [1.0, 0.0, 0.0], k=1)


def test_nearest_neighbors_csls_needs_source():
    space = make_space(["aa"], [[1, 0]])
    with pytest.raises(ContractError):
        nearest_neighbors(space, [1.0, 0.0], k=1, metric="csls")


def test_csls_demotes_hub():
    # "hub" is close to every source vector, "exact" is only close to the query
    target = make_space(["exact", "hub"], [[1.0, 0.0, 0.0], [0.8, 0.6, 0.0]])
    source = make_space(
        ["q", "s1", "s2"], [[0.9, 0.4359, 0.0], [0.0, 1.0, 0.0], [0.6, 0.8, 0.0]]
    )
    query = source.vector("q")

    by_cosine = nearest_neighbors(target, query, k=1)
    by_csls = nearest_neighbors(target, query, k=1, metric="csls", csls_n=2, source=source)
    assert by_cosine[0][0] == "hub"
    assert by_csls[0][0] == "exact"


def test_select_top_k_keeps_ties_in_order():
    scores = np.array([0.5, 0.9, 0.5, 0.5, 0.1])
    lex_rank = np.array([3, 0, 2, 1, 4])
    assert select_top_k(scores, lex_rank, 3).tolist() == [1, 3, 2]


def oracle_cosine(u, v):
    value = cosine(u, v)
    return COSINE_SENTINEL if value is None else value


def test_nearest_neighbors_full_vocabulary_matches_sorted_oracle(rng):
    words = [f"w{i:02d}" for i in range(40)]
    vectors = rng.normal(size=(40, 5))
    vectors[7] = 0.0
    space = make_space(words, vectors)

    for _ in range(10):
        query = rng.normal(size=5)
        expected = sorted(words, key=lambda w: (-oracle_cosine(query, space.vector(w)), w))
        result = nearest_neighbors(space, query, k=len(words))
        assert [term for term, _ in result] == expected
        for term, score in result:
            assert score == pytest.approx(oracle_cosine(query, space.vector(term)), abs=1e-12)


def test_best_matches_prefers_smallest_term_among_ties():
    scores = np.array([[0.5, 0.9, 0.9, 0.1], [0.3, 0.2, 0.1, 0.0]])
    lex_rank = np.array([0, 3, 1, 2])
    assert best_matches(scores, lex_rank).tolist() == [2, 0]


def test_blocks_bound_the_similarity_matrix():
    assert block_rows(200_000) * 200_000 * 8 <= BLOCK_BYTES
    assert block_rows(10**12) == 1
    assert list(iter_blocks(5, BLOCK_BYTES // 16)) == [(0, 2), (2, 4), (4, 5)]


def test_invalid_utf8_is_format_error(tmp_path):
    path = tmp_path / "vectors.vec"
    path.write_bytes(b"\xff\xfe 0 1\n")
    with pytest.raises(InputFormatError, match="invalid UTF-8"):
        load_embeddings(path)
