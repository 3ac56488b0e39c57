"""
Rankers
-------
Retrieval models producing TREC-style ranked runs.
"""

from .base import Query, RankedRun, Ranker, RunEntry, load_topics, rank_queries

__all__ = ["Query", "RankedRun", "Ranker", "RunEntry", "load_topics", "rank_queries"]
