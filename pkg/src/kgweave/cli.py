"""Command-line interface.

Every command writes machine-readable JSON lines to stdout and a short
human-readable table to stderr.  Exit codes:

    0  success
    1  module error (reported as ``{"error": "<module>.<Name>", ...}`` on stderr)
    2  usage or configuration error
    3  ScopeNotClean: --require-clean-backends on a populated run
    4  MissingArtifacts: a prerequisite command has not been run
    5  check found inconsistencies
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Sequence

from kgweave.clock import LogicalClock, utc_now
from kgweave.config import RunConfig, load_run_config
from kgweave.corpus import Chunk, Document, chunk_corpus, load_corpus
from kgweave.errors import KGWeaveError, MissingArtifacts, ScopeNotClean
from kgweave.evalkit import (
    PredictionRecord,
    attach_scores,
    extract_answer,
    load_instances,
    load_predictions,
    score_dataset,
    unresolved_evidence,
    write_predictions,
)
from kgweave.graph_store import GraphStore
from kgweave.jsonio import atomic_write, dumps_line, read_jsonl, write_jsonl
from kgweave.retrieval import RetrievalRequest
from kgweave.schema import SchemaProfile, SchemaRegistry
from kgweave.sync import AlertLog
from kgweave.toolkit.provenance import ProvenanceLedger
from kgweave.toolkit.schemas import export_schemas
from kgweave.toolkit.tools import Workspace
from kgweave.vector_index import HashingEmbedder, VectorIndex

FORMAT_VERSION = 1
BUNDLED_PREFIX = "bundled:"

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_NOT_CLEAN, EXIT_MISSING, EXIT_INCONSISTENT = 0, 1, 2, 3, 4, 5

ARTIFACTS = {
    "documents": "documents.jsonl",
    "chunks": "chunks.jsonl",
    "config": "run.json",
    "graph": "graph.jsonl",
    "vectors": "vectors.jsonl",
    "provenance": "provenance.jsonl",
    "alerts": "alerts.jsonl",
    "schema": "schema.json",
    "report": "report.json",
    "review": "review_queue.jsonl",
    "checkpoints": "checkpoints",
}


def resolve_path(p: str) -> Path:
    """Plain paths pass through; ``bundled:<rel>`` points into the package data."""
    if p.startswith(BUNDLED_PREFIX):
        return Path(str(resources.files("kgweave") / "data" / p[len(BUNDLED_PREFIX):]))
    return Path(p)


def _emit(records: Sequence[dict]) -> None:
    for r in records:
        sys.stdout.write(dumps_line(r) + "\n")
    sys.stdout.flush()


def _table(rows: Sequence[dict], cols: Sequence[str]) -> None:
    if not rows:
        print("(no rows)", file=sys.stderr)
        return
    cells = [[("" if r.get(c) is None else str(r.get(c)))[:48] for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    print("  ".join(c.ljust(w) for c, w in zip(cols, widths)), file=sys.stderr)
    for row in cells:
        print("  ".join(v.ljust(w) for v, w in zip(row, widths)), file=sys.stderr)


def _artifact(cfg: RunConfig, name: str) -> Path:
    return cfg.run_dir / ARTIFACTS[name]


def _require(cfg: RunConfig, *names: str, hint: str) -> None:
    missing = [ARTIFACTS[n] for n in names if not _artifact(cfg, n).exists()]
    if missing:
        raise MissingArtifacts(f"{cfg.run_dir}: missing {', '.join(missing)}; run `kgweave {hint}` first")


def _clock(cfg: RunConfig, start: int = 0):
    return LogicalClock(start) if cfg.clock == "logical" else utc_now


def _load_docs_and_chunks(cfg: RunConfig) -> tuple[list[Document], dict[str, list[Chunk]]]:
    docs = [
        Document(d["doc_id"], d["title"], d["body"], d.get("source_uri"))
        for d in read_jsonl(_artifact(cfg, "documents"))
        if "doc_id" in d
    ]
    by_doc: dict[str, list[Chunk]] = {d.doc_id: [] for d in docs}
    for rec in read_jsonl(_artifact(cfg, "chunks")):
        if "chunk_id" in rec:
            by_doc[rec["doc_id"]].append(Chunk.from_dict(rec))
    return docs, by_doc


def load_workspace(cfg: RunConfig) -> Workspace:
    """Rebuild the stores of a finished build."""
    _require(cfg, "graph", "vectors", "schema", hint="build")
    emb = HashingEmbedder(cfg.embedding_dim)
    index = VectorIndex.load(_artifact(cfg, "vectors"))
    if index.dimension != emb.dimension:
        raise MissingArtifacts(f"index dimension {index.dimension} does not match embedding_dim {emb.dimension}")
    ws = Workspace(
        graph=GraphStore.load(_artifact(cfg, "graph")),
        index=index,
        embedder=emb,
        schema=SchemaRegistry(SchemaProfile.load(_artifact(cfg, "schema")), emb),
        scope=cfg.scope,
        ledger=ProvenanceLedger.load(_artifact(cfg, "provenance")),
        alerts=AlertLog.load(_artifact(cfg, "alerts")),
    )
    if _artifact(cfg, "chunks").exists():
        docs, by_doc = _load_docs_and_chunks(cfg)
        for d in docs:
            ws.add_chunks(by_doc[d.doc_id], d.title)
    return ws


def require_clean_backends(cfg: RunConfig) -> None:
    populated = [ARTIFACTS[n] for n in ("graph", "vectors", "provenance") if _artifact(cfg, n).exists()]
    if populated:
        raise ScopeNotClean(f"run {cfg.scope.key()} already has {', '.join(populated)}")


# -- commands --------------------------------------------------------------


def cmd_ingest(cfg: RunConfig, manifest: str) -> list[dict]:
    docs = load_corpus(resolve_path(manifest))
    by_doc = chunk_corpus(docs, cfg.chunker)
    cfg.run_dir.mkdir(parents=True, exist_ok=True)
    header = {"format_version": FORMAT_VERSION}
    write_jsonl(_artifact(cfg, "documents"),
                [header, *({"doc_id": d.doc_id, "title": d.title, "body": d.body, "source_uri": d.source_uri}
                           for d in docs)])
    write_jsonl(_artifact(cfg, "chunks"), [header, *(c.to_dict() for d in docs for c in by_doc[d.doc_id])])
    atomic_write(_artifact(cfg, "config"), json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    return [
        {"chunk_id": c.chunk_id, "doc_id": c.doc_id, "index": c.index, "pos": c.pos,
         "struct_label": c.struct_label.value, "chars": len(c.text)}
        for d in docs
        for c in by_doc[d.doc_id]
    ]


def _make_policy(cfg: RunConfig):
    from kgweave.agent import ChatToolsPolicy, ScriptedPolicy, load_script

    if cfg.policy.script:
        return ScriptedPolicy(load_script(resolve_path(cfg.policy.script)))
    if cfg.policy.endpoint:
        return ChatToolsPolicy(cfg.policy.endpoint, cfg.policy.model or "default",
                               os.environ.get(cfg.policy.api_key_env), cfg.llm_timeout)
    raise ValueError("build needs a policy: --script PATH or --endpoint URL")


def cmd_build(cfg: RunConfig, resume: bool = False) -> dict:
    from kgweave.agent import AgentConfig, Session

    _require(cfg, "documents", "chunks", hint="ingest")
    if cfg.require_clean_backends:
        require_clean_backends(cfg)
    policy = _make_policy(cfg)
    docs, by_doc = _load_docs_and_chunks(cfg)
    agent_cfg = AgentConfig(max_rounds=cfg.max_rounds, llm_timeout=cfg.llm_timeout,
                            llm_total_timeout=cfg.llm_total_timeout)
    cp_dir = _artifact(cfg, "checkpoints")
    emb = HashingEmbedder(cfg.embedding_dim)
    if resume and (cp_dir / "checkpoint.json").exists():
        session = Session.resume(cp_dir, policy, emb, agent_cfg)
    else:
        if cp_dir.exists():
            for p in cp_dir.iterdir():
                p.unlink()
        ws = Workspace.create(cfg.scope, embedder=emb, clock=_clock(cfg))
        session = Session(ws, policy, agent_cfg, cp_dir, session_id=cfg.run_id)
    report = session.run(docs, by_doc)
    ws = session.ws
    ws.graph.dump(_artifact(cfg, "graph"))
    ws.index.dump(_artifact(cfg, "vectors"))
    ws.ledger.dump(_artifact(cfg, "provenance"))
    ws.alerts.dump(_artifact(cfg, "alerts"))
    ws.schema.profile.export(_artifact(cfg, "schema"))
    write_jsonl(_artifact(cfg, "review"), report.review_queue)
    out = report.to_dict()
    out.pop("nodes")
    atomic_write(_artifact(cfg, "report"), json.dumps(out, indent=2, sort_keys=True) + "\n")
    return out


def cmd_query(cfg: RunConfig, question: str, **overrides: Any) -> dict:
    ws = load_workspace(cfg)
    r = cfg.retrieval
    opts = {"mode": r.mode, "top_k": r.top_k, "k1": r.k1, "h": r.h, "rrf_k": r.rrf_k, "kg_timeout": r.kg_timeout}
    opts.update({k: v for k, v in overrides.items() if v is not None})
    res = ws.retriever.retrieve(RetrievalRequest(question, scope=ws.scope, **opts))
    cands = []
    for rank, c in enumerate(res.candidates, 1):
        chunk = ws.chunks.get(c.object_id)
        cands.append({"rank": rank, **c.to_dict(), "doc_id": chunk.doc_id if chunk else None,
                      "preview": chunk.text[:80].replace("\n", " ") if chunk else ""})
    return {"query": question, "mode": res.mode.value, "fallback": res.fallback, "candidates": cands}


def cmd_trace(cfg: RunConfig, document=None, chunk=None, entity=None, relation=None, operation=None) -> list[dict]:
    _require(cfg, "provenance", hint="build")
    ledger = ProvenanceLedger.load(_artifact(cfg, "provenance"))
    if entity is not None and not entity.startswith("ent-") and _artifact(cfg, "graph").exists():
        hits = GraphStore.load(_artifact(cfg, "graph")).lookup(entity)
        if hits:
            entity = hits[0].entity_id
    return [r.to_dict() for r in ledger.trace(document, chunk, entity, relation, operation)]


def cmd_check(cfg: RunConfig) -> dict:
    ws = load_workspace(cfg)
    return ws.sync.consistency_check(ws.scope).to_dict()


def predict(cfg: RunConfig, qa_path: str, top_k: Optional[int] = None) -> list[PredictionRecord]:
    """Retrieval-only predictions: evidence = top chunks, answer = best-overlap sentence."""
    ws = load_workspace(cfg)
    instances = load_instances(resolve_path(qa_path))
    r = cfg.retrieval
    k = top_k or min(3, r.top_k)
    out = []
    for inst in instances:
        req = RetrievalRequest(inst.question, r.mode, r.top_k, r.k1, r.h, ws.scope, r.kg_timeout, r.rrf_k)
        res = ws.retriever.retrieve(req)
        retrieved = [c.object_id for c in res.candidates if c.object_id in ws.chunks]
        evidence = retrieved[:k]
        answer = extract_answer(inst.question, [ws.chunks[e].text for e in evidence])
        doc = ws.chunks[evidence[0]].doc_id if evidence else inst.doc_id
        out.append(attach_scores(PredictionRecord(inst.question_id, answer, retrieved, evidence, doc), inst))
    return out


def cmd_eval(cfg: Optional[RunConfig], qa_path: str, predictions: Optional[str], out: Optional[str] = None) -> dict:
    instances = load_instances(resolve_path(qa_path))
    if predictions is not None:
        preds = load_predictions(resolve_path(predictions))
    else:
        if cfg is None:
            raise ValueError("eval needs --predictions or a built run")
        preds = predict(cfg, qa_path)
        write_predictions(Path(out) if out else cfg.run_dir / "predictions.jsonl", preds)
    summary = score_dataset(preds, instances)
    if cfg is not None and _artifact(cfg, "chunks").exists():
        ids = {rec["chunk_id"] for rec in read_jsonl(_artifact(cfg, "chunks")) if "chunk_id" in rec}
        summary["unresolved_evidence"] = len(unresolved_evidence(instances, ids))
    return summary


# -- argument parsing ------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--root", help="directory holding run directories (default: runs)")
    common.add_argument("--run-id")
    common.add_argument("--tenant")
    common.add_argument("--dataset")
    common.add_argument("--config", help="JSON run config file")
    common.add_argument("--clock", choices=["logical", "wall"])
    common.add_argument("--embedding-dim", type=int)

    p = argparse.ArgumentParser(prog="kgweave", description="Knowledge-graph construction and hybrid retrieval.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", parents=[common], help="load a manifest and chunk its documents")
    s.add_argument("manifest", help="JSONL manifest path, or bundled:minicorpus/manifest.jsonl")
    s.add_argument("--strategy", choices=["FIXED_SIZE", "SEMANTIC", "PARAGRAPH", "STRUCTURAL"])
    s.add_argument("--chunk-size", type=int)
    s.add_argument("--chunk-overlap", type=int)

    s = sub.add_parser("build", parents=[common], help="run a reading session over ingested chunks")
    s.add_argument("--script", help="scripted-policy fixture, e.g. bundled:minicorpus/script.json")
    s.add_argument("--endpoint", help="chat-completions base URL for the model-backed policy")
    s.add_argument("--model")
    s.add_argument("--max-rounds", type=int)
    s.add_argument("--require-clean-backends", action="store_true", default=None)
    s.add_argument("--resume", action="store_true", help="continue from the last checkpoint")

    s = sub.add_parser("query", parents=[common], help="retrieve ranked context for a question")
    s.add_argument("question")
    s.add_argument("--mode", choices=["VECTOR", "KG", "FUSION", "DEEP", "vector", "kg", "fusion", "deep"])
    s.add_argument("--top-k", type=int)
    s.add_argument("--k1", type=int)
    s.add_argument("--hops", type=int, dest="h")
    s.add_argument("--rrf-k", type=int)

    s = sub.add_parser("trace", parents=[common], help="list provenance records")
    s.add_argument("--document")
    s.add_argument("--chunk")
    s.add_argument("--entity", help="entity id or name")
    s.add_argument("--relation")
    s.add_argument("--operation", choices=["CREATE", "UPDATE", "MERGE", "DELETE"])

    sub.add_parser("check", parents=[common], help="cross-store consistency report")

    s = sub.add_parser("eval", parents=[common], help="score predictions against QA fixtures")
    s.add_argument("qa", help="QA fixture JSONL")
    s.add_argument("--predictions", help="prediction JSONL; omitted = predict from the built run")
    s.add_argument("--out", help="where to write generated predictions")

    s = sub.add_parser("schemas", help="export tool JSON schemas")
    s.add_argument("outdir")
    return p


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides: dict[str, Any] = {
        "root": args.root,
        "run_id": args.run_id,
        "tenant_id": args.tenant,
        "dataset": args.dataset,
        "clock": args.clock,
        "embedding_dim": args.embedding_dim,
    }
    for key in ("strategy", "chunk_size", "chunk_overlap", "max_rounds", "require_clean_backends"):
        overrides[key] = getattr(args, key, None)
    if getattr(args, "script", None) or getattr(args, "endpoint", None):
        overrides["policy"] = {"script": args.script, "endpoint": args.endpoint, "model": args.model}
    return load_run_config(args.config, overrides)


def _fail(code: int, exc: BaseException) -> int:
    err = exc.code if isinstance(exc, KGWeaveError) else f"usage.{type(exc).__name__}"
    print(json.dumps({"error": err, "message": str(exc)}, sort_keys=True), file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "schemas":
            paths = export_schemas(args.outdir)
            _emit([{"tool": p.name.split(".")[0], "path": str(p)} for p in paths])
            return EXIT_OK
        cfg = _config_from_args(args)
        if args.command == "ingest":
            rows = cmd_ingest(cfg, args.manifest)
            _emit(rows)
            _table(rows, ["chunk_id", "struct_label", "pos", "chars"])
        elif args.command == "build":
            report = cmd_build(cfg, resume=args.resume)
            _emit([report])
            _table([{**report["counters"], **{"chunks": report["chunks_archived"], "review": len(report["review_queue"]),
                                              "alerts": report["alerts"]}}],
                   ["chunks", "entities", "relations", "merges", "tool_calls", "review", "alerts"])
        elif args.command == "query":
            res = cmd_query(cfg, args.question, mode=args.mode, top_k=args.top_k, k1=args.k1, h=args.h,
                            rrf_k=args.rrf_k)
            _emit([{"query": res["query"], "mode": res["mode"], "fallback": res["fallback"]}, *res["candidates"]])
            _table(res["candidates"], ["rank", "object_id", "rank_vec", "rank_kg", "rrf_score", "source", "preview"])
        elif args.command == "trace":
            rows = cmd_trace(cfg, args.document, args.chunk, args.entity, args.relation, args.operation)
            _emit(rows)
            _table(rows, ["prov_id", "operation", "object_id", "source_chunk_id", "evidence_snippet"])
        elif args.command == "check":
            rep = cmd_check(cfg)
            _emit([rep])
            _table([{k: (v if isinstance(v, bool) else len(v)) for k, v in rep.items()}], list(rep))
            return EXIT_OK if rep["clean"] else EXIT_INCONSISTENT
        elif args.command == "eval":
            summary = cmd_eval(cfg, args.qa, args.predictions, args.out)
            _emit([summary])
            _table([summary], list(summary))
    except ScopeNotClean as exc:
        return _fail(EXIT_NOT_CLEAN, exc)
    except MissingArtifacts as exc:
        return _fail(EXIT_MISSING, exc)
    except KGWeaveError as exc:
        return _fail(EXIT_ERROR, exc)
    except (ValueError, FileNotFoundError) as exc:
        return _fail(EXIT_USAGE, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
