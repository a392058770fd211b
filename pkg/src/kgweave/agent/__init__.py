"""Reading sessions: state machine, decision loop, policies and checkpoints."""

from kgweave.agent.checkpoint import Checkpoint, load_checkpoint, restore_workspace, save_checkpoint
from kgweave.agent.errors import ErrorClass, RetryPolicy, classify_error, with_retry
from kgweave.agent.llm import ChatToolsPolicy
from kgweave.agent.policy import Decision, DecisionContext, DecisionPolicy, ScriptedPolicy, load_script
from kgweave.agent.prompt import Prompt, assemble_prompt
from kgweave.agent.session import Session, SessionReport, run_session
from kgweave.agent.state import AgentConfig, AgentState, ErrorRecord

__all__ = [
    "Checkpoint",
    "load_checkpoint",
    "restore_workspace",
    "save_checkpoint",
    "ErrorClass",
    "RetryPolicy",
    "classify_error",
    "with_retry",
    "ChatToolsPolicy",
    "Decision",
    "DecisionContext",
    "DecisionPolicy",
    "ScriptedPolicy",
    "load_script",
    "Prompt",
    "assemble_prompt",
    "Session",
    "SessionReport",
    "run_session",
    "AgentConfig",
    "AgentState",
    "ErrorRecord",
]
