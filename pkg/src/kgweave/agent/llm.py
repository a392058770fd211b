"""Decision policy backed by a chat-completions endpoint with tool calling.

Speaks the widely used ``/chat/completions`` wire format: the request
carries ``messages`` and ``tools``; the reply's first choice either holds
``tool_calls`` or a final text, which is taken as the paragraph summary.
``httpx`` is imported lazily so the rest of the package runs without it.
"""

from __future__ import annotations

import json
import logging
from typing import Any, Callable, Optional

from kgweave.errors import TransientError, UnrecoverableError
from kgweave.graph_store import Entity
from kgweave.toolkit.schemas import TOOL_SCHEMAS
from kgweave.toolkit.tools import Observation, TodoItem, ToolCall

from kgweave.agent.policy import Decision, DecisionContext

log = logging.getLogger(__name__)

DISCOVERY_PROMPT = (
    "Read the document excerpts below and propose a knowledge-graph schema. Reply with one JSON object "
    'with keys "domain_label" (string), "entity_labels" (list of strings), "attribute_patterns" (list of '
    'strings) and "relation_types" (list of objects with "name", "domain_label", "range_label", '
    '"quality_score" in [0,1]).'
)


def tool_specs(names: Optional[list[str]] = None) -> list[dict]:
    out = []
    for name in sorted(names or TOOL_SCHEMAS):
        params = {k: v for k, v in TOOL_SCHEMAS[name].items() if k != "$schema"}
        out.append({"type": "function", "function": {"name": name, "parameters": params}})
    return out


def _parse_json(text: str) -> Optional[Any]:
    text = text.strip()
    if text.startswith("```"):
        text = text.strip("`")
        text = text[text.find("\n") + 1:] if "\n" in text else text
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return None


class ChatToolsPolicy:
    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: Optional[str] = None,
        timeout: float = 120.0,
        client: Any = None,
        temperature: float = 0.0,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.temperature = temperature
        self._client = client
        self._dialogue: dict[str, list[dict]] = {}
        self._seen: dict[str, int] = {}

    def _http(self):
        if self._client is None:
            import httpx

            self._client = httpx.Client(timeout=self.timeout)
        return self._client

    def _post(self, payload: dict) -> dict:
        import httpx

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = self._http().post(f"{self.endpoint}/chat/completions", json=payload, headers=headers,
                                     timeout=self.timeout)
        except httpx.TimeoutException as exc:
            raise TransientError(f"chat request timed out: {exc}") from exc
        except httpx.TransportError as exc:
            raise TransientError(f"chat transport failure: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientError(f"chat endpoint returned {resp.status_code}")
        if resp.status_code >= 400:
            raise UnrecoverableError(f"chat endpoint returned {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]
        except (ValueError, KeyError, IndexError) as exc:
            raise UnrecoverableError(f"malformed chat response: {exc!r}") from exc

    def decide(self, ctx: DecisionContext) -> Decision:
        cid = ctx.chunk.chunk_id
        if ctx.round == 0 or cid not in self._dialogue:
            self._dialogue[cid] = [{"role": "user", "content": ctx.prompt.user}]
            self._seen[cid] = 0
        dialogue = self._dialogue[cid]
        for obs in ctx.observations[self._seen[cid]:]:
            dialogue.append(obs.to_message())
        self._seen[cid] = len(ctx.observations)

        payload = {
            "model": self.model,
            "messages": [{"role": "system", "content": ctx.prompt.system}, *dialogue],
            "tools": tool_specs(list(ctx.tool_names) or None),
            "temperature": self.temperature,
        }
        msg = self._post(payload)
        raw_calls = msg.get("tool_calls") or []
        if not raw_calls:
            content = (msg.get("content") or "").strip()
            parsed = _parse_json(content)
            if isinstance(parsed, dict) and "chunk_complete" in parsed:
                content = str(parsed["chunk_complete"])
            self._dialogue.pop(cid, None)
            return Decision.complete(content or f"{cid}: completed without summary")

        dialogue.append({"role": "assistant", "content": msg.get("content"), "tool_calls": raw_calls})
        calls = []
        known = set(ctx.tool_names) or set(TOOL_SCHEMAS)
        for i, rc in enumerate(raw_calls):
            fn = rc.get("function", {})
            call_id = rc.get("id") or f"{cid}:r{ctx.round}:{i}"
            name = fn.get("name", "")
            args = fn.get("arguments") or "{}"
            args = _parse_json(args) if isinstance(args, str) else args
            if name not in known or not isinstance(args, dict):
                # answer the call locally so the dialogue stays well formed
                err = {"code": "toolkit.UnknownTool" if name not in known else "toolkit.SchemaViolation",
                       "message": f"cannot run {name!r} with the given arguments"}
                dialogue.append(Observation(call_id, name, False, None, err).to_message())
                continue
            calls.append(ToolCall(name, args, call_id))
        if not calls:
            return Decision.calls([])
        return Decision.calls(calls)

    def discover_schema(self, samples: list[str]) -> Optional[dict]:
        text = "\n\n---\n\n".join(samples)
        payload = {
            "model": self.model,
            "messages": [{"role": "system", "content": DISCOVERY_PROMPT}, {"role": "user", "content": text}],
            "temperature": self.temperature,
        }
        try:
            msg = self._post(payload)
        except (TransientError, UnrecoverableError) as exc:
            log.info("schema discovery failed: %s", exc)
            return None
        found = _parse_json(msg.get("content") or "")
        return found if isinstance(found, dict) else None

    def handle_todo(self, todo: TodoItem, lookup: Callable[[str], list[Entity]]) -> Optional[list[ToolCall]]:
        # open todos stay visible in the working-memory block; the model acts on them in the loop
        return None
