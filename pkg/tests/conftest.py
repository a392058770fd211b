from __future__ import annotations

from importlib import resources
from pathlib import Path

import pytest

from kgweave.agent import AgentConfig, ScriptedPolicy, Session, load_script
from kgweave.clock import LogicalClock
from kgweave.corpus import ChunkerConfig, chunk_corpus, load_corpus
from kgweave.graph_store import IsolationScope
from kgweave.toolkit.tools import Workspace

MINI = Path(str(resources.files("kgweave") / "data" / "minicorpus"))
SCOPE = IsolationScope("tenant-a", "run-test", "mini")


def no_sleep(_: float) -> None:
    pass


def mini_inputs():
    docs = load_corpus(MINI / "manifest.jsonl")
    return docs, chunk_corpus(docs, ChunkerConfig())


def mini_policy():
    return ScriptedPolicy(load_script(MINI / "script.json"))


def fresh_workspace(scope: IsolationScope = SCOPE) -> Workspace:
    return Workspace.create(scope, clock=LogicalClock())


def build_mini(policy=None, checkpoint_dir=None, cfg: AgentConfig | None = None):
    """Run the scripted session over the bundled corpus; returns (session, report)."""
    docs, by_doc = mini_inputs()
    s = Session(fresh_workspace(), policy or mini_policy(), cfg or AgentConfig(), checkpoint_dir,
                session_id="test", sleep=no_sleep)
    return s, s.run(docs, by_doc)


@pytest.fixture
def mini_dir() -> Path:
    return MINI


@pytest.fixture(scope="session")
def built_mini():
    return build_mini()
