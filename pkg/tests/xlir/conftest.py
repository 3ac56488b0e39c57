"""Shared fixtures: small embedding spaces, hand-built indexes and a bilingual toy corpus."""
import sys
from pathlib import Path
from typing import Dict, Sequence

import numpy as np
import pytest

# Add project root to path
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

from src.xlir.corpus_index import Document, IndexedCollection
from src.xlir.embedding_store import EmbeddingSpace, normalize_space, write_embeddings

ENGLISH = [
    "house", "dog", "cat", "tree", "water", "bread", "milk", "car", "road", "city",
    "river", "book", "school", "child", "mother", "father", "garden", "window", "table", "chair",
]
DUTCH = [
    "huis", "hond", "kat", "boom", "water", "brood", "melk", "auto", "weg", "stad",
    "rivier", "boek", "school", "kind", "moeder", "vader", "tuin", "raam", "tafel", "stoel",
]

DOCUMENTS = {
    "doc01": "het huis met de tuin en het raam",
    "doc02": "de hond en de kat in de tuin",
    "doc03": "de boom bij de rivier",
    "doc04": "water uit de rivier en melk",
    "doc05": "brood en melk op de tafel",
    "doc06": "de auto op de weg naar de stad",
    "doc07": "het kind leest een boek op school",
    "doc08": "moeder en vader in het huis",
    "doc09": "de stoel bij de tafel en het raam",
    "doc10": "de stad aan de rivier",
}

TOPICS = [
    ("q1", "house garden", "a house with a garden and a window"),
    ("q2", "dog cat", "the dog and the cat"),
    ("q3", "river city", "the city by the river"),
    ("q4", "bread milk", "bread and milk on the table"),
    ("q5", "school book", "a child with a book at school"),
]

QRELS = [
    ("q1", "doc01", 1),
    ("q1", "doc09", 0),
    ("q2", "doc02", 1),
    ("q3", "doc10", 1),
    ("q3", "doc03", 0),
    ("q4", "doc05", 1),
    ("q4", "doc04", 1),
    ("q5", "doc07", 1),
]


def random_rotation(rng: np.random.Generator, dim: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
    return q * np.sign(np.diag(r))


def unit_rows(rng: np.random.Generator, rows: int, dim: int) -> np.ndarray:
    vectors = rng.normal(size=(rows, dim))
    return vectors / np.linalg.norm(vectors, axis=1, keepdims=True)


def make_space(vocab: Sequence[str], vectors, lang: str = "x", normalize: bool = True) -> EmbeddingSpace:
    space = EmbeddingSpace(
        lang=lang, vocab=tuple(vocab), vectors=np.array(vectors, dtype=np.float64)
    )
    return normalize_space(space) if normalize else space


def make_index(texts: Dict[str, Sequence[str]], dim: int = 2) -> IndexedCollection:
    """Index from already tokenized documents, without embeddings."""
    docs = tuple(Document(doc_id, tuple(tokens)) for doc_id, tokens in texts.items())
    return IndexedCollection(
        docs=docs,
        doc_vec_add=np.zeros((len(docs), dim)),
        doc_vec_idf=np.zeros((len(docs), dim)),
        oov_doc_terms=0,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def rotation_spaces(rng):
    """500 random 50-d unit vectors and their image under a random rotation."""
    dim = 50
    source_vecs = unit_rows(rng, 500, dim)
    rotation = random_rotation(rng, dim)
    source = make_space([f"s{i}" for i in range(500)], source_vecs, "src")
    target = make_space([f"t{i}" for i in range(500)], source_vecs @ rotation, "tgt")
    return source, target, rotation


@pytest.fixture
def bilingual_files(tmp_path):
    """Two 20-term vector files related by a rotation, plus collection, topics and qrels."""
    rng = np.random.default_rng(7)
    dim = 8
    source_vecs = unit_rows(rng, len(ENGLISH), dim)
    target_vecs = source_vecs @ random_rotation(rng, dim)

    data = tmp_path / "data"
    data.mkdir()
    paths = {
        "source_vectors": data / "en.vec",
        "target_vectors": data / "nl.vec",
        "seed_dictionary": data / "en-nl.train.txt",
        "test_dictionary": data / "en-nl.test.txt",
        "collection": data / "docs.jsonl",
        "topics": data / "topics.tsv",
        "qrels": data / "qrels.txt",
        "source_stopwords": data / "en.stop",
        "target_stopwords": data / "nl.stop",
    }
    write_embeddings(make_space(ENGLISH, source_vecs, "en", normalize=False), paths["source_vectors"])
    write_embeddings(make_space(DUTCH, target_vecs, "nl", normalize=False), paths["target_vectors"])

    pairs = [f"{en}\t{nl}" for en, nl in zip(ENGLISH, DUTCH)]
    paths["seed_dictionary"].write_text("\n".join(pairs[:14]) + "\n", encoding="utf-8")
    paths["test_dictionary"].write_text("\n".join(pairs[14:]) + "\n", encoding="utf-8")

    paths["collection"].write_text(
        "".join(f'{{"id": "{doc_id}", "text": "{text}"}}\n' for doc_id, text in DOCUMENTS.items()),
        encoding="utf-8",
    )
    paths["topics"].write_text(
        "".join(f"{qid}\t{title}\t{desc}\n" for qid, title, desc in TOPICS), encoding="utf-8"
    )
    paths["qrels"].write_text(
        "".join(f"{qid} 0 {doc} {rel}\n" for qid, doc, rel in QRELS), encoding="utf-8"
    )
    paths["source_stopwords"].write_text("the\nand\nwith\non\nat\nby\n", encoding="utf-8")
    paths["target_stopwords"].write_text("de\nhet\nen\neen\nop\nin\n", encoding="utf-8")
    return paths
