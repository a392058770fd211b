"""Exception hierarchy shared by every kgweave module.

Each class carries a ``module`` prefix so the CLI can report errors as
``<module>.<ErrorName>`` without inspecting the traceback.
"""

from __future__ import annotations


class KGWeaveError(Exception):
    module = "kgweave"

    @property
    def code(self) -> str:
        return f"{self.module}.{type(self).__name__}"


# corpus
class CorpusError(KGWeaveError):
    module = "corpus"


class EmptyDocument(CorpusError):
    pass


class InvalidConfig(CorpusError):
    pass


class ManifestNotFound(CorpusError):
    pass


class DuplicateDocId(CorpusError):
    pass


class UnreadableFile(CorpusError):
    pass


class LifecycleViolation(CorpusError):
    """A chunk was asked to move backwards through its lifecycle."""


# graph_store
class GraphError(KGWeaveError):
    module = "graph_store"


class NotFound(GraphError):
    pass


class DanglingEndpoint(GraphError):
    pass


class ScopeMismatch(GraphError):
    pass


class UnknownSeed(GraphError):
    pass


class GraphTimeout(GraphError):
    pass


# vector_index
class VectorError(KGWeaveError):
    module = "vector_index"


class DimensionMismatch(VectorError):
    pass


class DegenerateVector(VectorError):
    pass


class VectorWriteError(VectorError):
    """The vector store refused or lost a write."""


class EmbeddingError(VectorError):
    pass


# sync
class SyncError(KGWeaveError):
    module = "sync"


class EmptyMemberSet(SyncError):
    pass


class MissingMemberVector(SyncError):
    pass


# toolkit
class ToolError(KGWeaveError):
    module = "toolkit"


class UnknownTool(ToolError):
    pass


class SchemaViolation(ToolError):
    pass


class GateRejected(ToolError):
    def __init__(self, rule: str, name: str = ""):
        super().__init__(f"entity name {name!r} rejected by quality gate rule {rule}")
        self.rule = rule
        self.name = name


class SelfMerge(ToolError):
    pass


class AmbiguousEndpoint(ToolError):
    pass


class EvidenceNotAnchored(ToolError):
    pass


class UnknownChunk(ToolError):
    pass


class SyncFailed(ToolError):
    pass


# agent
class AgentError(KGWeaveError):
    module = "agent"


class TransientError(AgentError):
    """Timeouts, rate limits and dropped connections; retried, never surfaced."""


class UnrecoverableError(AgentError):
    pass


class CheckpointError(AgentError):
    pass


# retrieval
class RetrievalError(KGWeaveError):
    module = "retrieval"


class EmptyIndex(RetrievalError):
    pass


# evalkit
class EvalError(KGWeaveError):
    module = "evalkit"


class MissingPrediction(EvalError):
    pass


class UnknownQuestion(EvalError):
    pass


# cli
class CLIError(KGWeaveError):
    module = "cli"


class ScopeNotClean(CLIError):
    pass


class MissingArtifacts(CLIError):
    pass
