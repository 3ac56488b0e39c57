"""Ranker adapters, one per model family."""

from .bwe_agg import BweAggRanker
from .ensemble import EnsembleRanker
from .query_likelihood import LmUniRanker, TbtQtRanker

__all__ = ["BweAggRanker", "EnsembleRanker", "LmUniRanker", "TbtQtRanker"]
