"""
xlir
----
Batch cross-lingual retrieval over shared word embedding spaces: alignment,
indexing, ranking and TREC-style evaluation.
"""
