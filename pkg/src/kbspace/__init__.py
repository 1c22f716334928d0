"""Question-specific search spaces over large knowledge bases."""

from .config import EngineConfig, load_config
from .embeddings import EmbeddingStore, load_embeddings
from .estimator import SearchSpaceReducer
from .ingest import build_index, ingest
from .lexical import BM25, LexicalIndex
from .scoring import SignalWeights, auto_k, auto_p, threshold_topk
from .search_space import SearchSpace, dumps, space_to_dict
from .store import KnowledgeBase
from .types import Distance, Fact, ItemKind, ItemRecord

__all__ = [
    "BM25",
    "Distance",
    "EmbeddingStore",
    "EngineConfig",
    "Fact",
    "ItemKind",
    "ItemRecord",
    "KnowledgeBase",
    "LexicalIndex",
    "SearchSpace",
    "SearchSpaceReducer",
    "SignalWeights",
    "auto_k",
    "auto_p",
    "build_index",
    "dumps",
    "ingest",
    "load_config",
    "load_embeddings",
    "space_to_dict",
    "threshold_topk",
]
__version__ = "0.1.0"
