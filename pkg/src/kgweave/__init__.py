"""Agent-built knowledge graphs with evidence provenance, graph/vector
synchronization with compensation, and fused graph + vector retrieval."""

from kgweave.corpus import Chunk, ChunkerConfig, Document, Strategy, chunk_corpus, chunk_document, load_corpus
from kgweave.errors import KGWeaveError
from kgweave.graph_store import GraphStore, IsolationScope
from kgweave.retrieval import Mode, RetrievalRequest, Retriever, rrf_fuse
from kgweave.sync import AlertLog, SyncCoordinator
from kgweave.vector_index import HashingEmbedder, VectorIndex

__version__ = "0.1.0"

__all__ = [
    "Chunk",
    "ChunkerConfig",
    "Document",
    "Strategy",
    "chunk_corpus",
    "chunk_document",
    "load_corpus",
    "KGWeaveError",
    "GraphStore",
    "IsolationScope",
    "Mode",
    "RetrievalRequest",
    "Retriever",
    "rrf_fuse",
    "AlertLog",
    "SyncCoordinator",
    "HashingEmbedder",
    "VectorIndex",
]
