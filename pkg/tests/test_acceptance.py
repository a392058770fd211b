"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -m acceptance -s`` to see the report lines.
"""

from __future__ import annotations

import json
import random
import time

import numpy as np
import pytest

import oracles
from conftest import MINI, build_mini, fresh_workspace, mini_inputs, mini_policy, no_sleep
from kgweave import cli
from kgweave.agent import AgentConfig, Session
from kgweave.corpus import ChunkerConfig, Document, Strategy, chunk_document
from kgweave.errors import UnrecoverableError
from kgweave.evalkit import (
    Annotation,
    PredictionRecord,
    QAInstance,
    answer_f1,
    evidence_f1,
    load_instances,
    score_dataset,
)
from kgweave.faults import CrashingPolicy, FlakyVectorIndex, TimeoutGraph
from kgweave.graph_store import Entity, GraphStore, IsolationScope, Relation
from kgweave.retrieval import Mode, RetrievalRequest, Retriever, rrf_fuse
from kgweave.sync import AlertLog, SyncCoordinator, SyncStatus
from kgweave.toolkit.gate import QualityGate
from kgweave.toolkit.tools import ToolState, Toolkit
from kgweave.vector_index import Collection, HashingEmbedder, VectorIndex

pytestmark = pytest.mark.acceptance


def report(n: int, title: str, ok: bool, detail: str) -> None:
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n:2d} {title}: {detail}")


# 1 ---------------------------------------------------------------------------


def _random_rankings(rng: random.Random) -> tuple[list[str], list[str]]:
    pool = [f"d{i:02d}" for i in range(rng.randint(1, 50))]
    a = rng.sample(pool, rng.randint(0, len(pool)))
    b = rng.sample(pool, rng.randint(0, len(pool)))
    return a, b


def test_rrf_exactness_and_monotonicity():
    rng = random.Random(1)
    t0 = time.perf_counter()
    worst, order_mismatch = 0.0, 0
    for _ in range(200):
        a, b = _random_rankings(rng)
        got = rrf_fuse(a, b, 60)
        want = oracles.rrf([a, b], 60)
        if [g[0] for g in got] != [w[0] for w in want]:
            order_mismatch += 1
        for (_, s1, _, _), (_, s2) in zip(got, want):
            worst = max(worst, abs(s1 - s2))

    violations = 0
    done = 0
    while done < 1000:
        a, b = _random_rankings(rng)
        stream = a if rng.random() < 0.5 else b
        if len(stream) < 2:
            continue
        i = rng.randint(1, len(stream) - 1)
        x = stream[i]
        before = rrf_fuse(a, b)
        j = rng.randint(0, i - 1)
        stream.insert(j, stream.pop(i))
        after = rrf_fuse(a, b)
        pos_before = [t[0] for t in before].index(x)
        pos_after = [t[0] for t in after].index(x)
        score_before = dict((t[0], t[1]) for t in before)[x]
        score_after = dict((t[0], t[1]) for t in after)[x]
        if pos_after > pos_before or score_after <= score_before:
            violations += 1
        done += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and order_mismatch == 0 and violations == 0 and elapsed < 5.0
    report(1, "RRF exactness", ok,
           f"max |diff|={worst:.1e}, order mismatches={order_mismatch}, "
           f"monotonicity violations={violations}/1000, {elapsed:.2f}s")
    assert ok


# 2 ---------------------------------------------------------------------------


def test_vector_search_matches_exhaustive_scoring():
    rng = np.random.default_rng(2)
    dim, n = 16, 10_000
    scopes = [IsolationScope("t", "r1", "d"), IsolationScope("t", "r2", "d")]
    t0 = time.perf_counter()
    idx = VectorIndex(dim)
    rows = []
    vecs = rng.normal(size=(n, dim))
    for i in range(n):
        coll = Collection.CHUNK if i % 3 else Collection.ENTITY
        scope = scopes[i % 2]
        group = int(rng.integers(0, 4))
        oid = f"obj-{i:05d}"
        idx.insert(oid, coll, vecs[i], scope, {"group": group})
        rows.append((oid, vecs[i].tolist(), (coll, scope.run_id, group)))

    mismatches = 0
    for qi in range(5):
        q = rng.normal(size=dim)
        want_coll = Collection.CHUNK if qi % 2 == 0 else Collection.ENTITY
        group = qi % 4
        got = idx.search(q, 25, scope=scopes[0], collection=want_coll, where={"group": group})
        want = oracles.exhaustive_search(
            rows, q.tolist(), 25, lambda m: m == (want_coll, "r1", group)
        )
        if [h.object_id for h in got] != [w[0] for w in want]:
            mismatches += 1
        elif any(abs(h.score - w[1]) > 1e-9 for h, w in zip(got, want)):
            mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 30.0
    report(2, "vector search oracle", ok, f"{n} records, 5 filtered queries, mismatches={mismatches}, {elapsed:.2f}s")
    assert ok


# 3 ---------------------------------------------------------------------------


def _random_graph(rng: random.Random):
    n = rng.randint(1, 50)
    nodes = [f"n{i:02d}" for i in range(n)]
    g = GraphStore()
    for v in nodes:
        g.upsert_entity(Entity(v, v, "Concept"))
    live = []
    for k in range(rng.randint(0, 2 * n)):
        a, b = rng.choice(nodes), rng.choice(nodes)
        rid = f"r{k:03d}"
        g.upsert_relation(Relation(rid, a, b, "RELATED_TO"))
        if rng.random() < 0.1:
            g.soft_delete_relation(rid, "fixture")
        else:
            live.append((a, b))
    return g, nodes, live


def test_bfs_matches_all_pairs_shortest_paths():
    rng = random.Random(3)
    t0 = time.perf_counter()
    mismatches = checks = 0
    for _ in range(100):
        g, nodes, live = _random_graph(rng)
        dist = oracles.floyd_warshall(nodes, live)
        seeds = set(rng.sample(nodes, rng.randint(1, min(3, len(nodes)))))
        for h in (1, 2, 3):
            want = {v for v in nodes if v not in seeds and min(dist[s, v] for s in seeds) <= h}
            checks += 1
            if g.neighbors_bfs(seeds, h) != want:
                mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 10.0
    report(3, "BFS oracle", ok, f"100 graphs, {checks} (seed set, h) checks, mismatches={mismatches}, {elapsed:.2f}s")
    assert ok


# 4 ---------------------------------------------------------------------------


def _sync_run(index: VectorIndex, seed: int):
    rng = random.Random(seed)
    graph = GraphStore()
    alerts = AlertLog()
    sync = SyncCoordinator(graph, index, HashingEmbedder(index.dimension), alerts)
    names = [f"Entity {i}" for i in range(200)]
    outcomes = []
    for call in range(500):
        name = rng.choice(names)
        eid = "ent-" + name.replace(" ", "-")
        ent = Entity(eid, name, "Concept", description=f"revision {call}", confidence=0.5 + rng.random() / 2)
        outcomes.append((eid, sync.sync_object(ent)))
    return graph, alerts, sync, outcomes


def test_sync_fault_injection_leaves_no_orphans():
    index = FlakyVectorIndex(64, p=0.3, seed=4)
    graph, alerts, sync, outcomes = _sync_run(index, seed=4)
    alerted = {a.object_id for a in alerts}
    orphans = [e.entity_id for e in graph.entities() if e.embedding_ref is None and e.entity_id not in alerted]
    failed = [(eid, o) for eid, o in outcomes if o.status is SyncStatus.FAILED]
    by_obj: dict[str, list] = {}
    for a in alerts:
        by_obj.setdefault(a.object_id, []).append(a)
    unlogged = [eid for eid, o in failed if not o.alert or not any(
        a.action in ("hard_delete", "mark_stale") for a in by_obj.get(eid, ()))]
    audit = sync.consistency_check()

    _, _, control_sync, control_out = _sync_run(VectorIndex(64), seed=4)
    control = control_sync.consistency_check()
    ok = (
        not orphans
        and not unlogged
        and not audit.orphan_vectors
        and not audit.dangling_refs
        and control.is_clean
        and all(o.ok for _, o in control_out)
    )
    report(4, "sync fault injection", ok,
           f"500 calls, {index.failures} injected failures, {len(failed)} FAILED outcomes, "
           f"orphans={len(orphans)}, unlogged={len(unlogged)}, control clean={control.is_clean}")
    assert ok


# 5 ---------------------------------------------------------------------------


def test_fallback_equals_vector_output(built_mini):
    session, _ = built_mini
    ws = session.ws
    slow = TimeoutGraph.wrap(ws.graph)
    retriever = Retriever(slow, ws.index, ws.embedder)
    questions = [i.question for i in load_instances(MINI / "qa.jsonl")] + ["Graph Attention Network", "CNN"]
    bad = []
    for q in questions:
        base = retriever.retrieve(RetrievalRequest(q, Mode.VECTOR, top_k=5, scope=ws.scope))
        want = [c.to_dict() for c in base.candidates]
        for mode in (Mode.FUSION, Mode.DEEP):
            res = retriever.retrieve(RetrievalRequest(q, mode, top_k=5, scope=ws.scope))
            if not res.fallback or [c.to_dict() for c in res.candidates] != want or base.fallback:
                bad.append((q, mode.value))
    ok = not bad
    report(5, "fallback equivalence", ok, f"{len(questions)} queries x 2 modes, mismatches={bad}")
    assert ok


# 6 ---------------------------------------------------------------------------


def _cli_run(root, capsys) -> tuple[dict[str, bytes], str]:
    common = ["--root", str(root), "--run-id", "det", "--tenant", "t0", "--dataset", "mini"]
    assert cli.main(["ingest", "bundled:minicorpus/manifest.jsonl", *common]) == 0
    assert cli.main(["build", "--script", "bundled:minicorpus/script.json", *common]) == 0
    capsys.readouterr()
    outputs = []
    for mode in ("VECTOR", "KG", "FUSION", "DEEP"):
        assert cli.main(["query", "How is the Graph Attention Network evaluated?", "--mode", mode, *common]) == 0
        outputs.append(capsys.readouterr().out)
    run_dir = root / "t0" / "det"
    files = {name: (run_dir / name).read_bytes()
             for name in ("graph.jsonl", "vectors.jsonl", "provenance.jsonl", "schema.json", "report.json")}
    return files, "".join(outputs)


def test_end_to_end_determinism_and_resume(tmp_path, capsys):
    files_a, query_a = _cli_run(tmp_path / "a", capsys)
    files_b, query_b = _cli_run(tmp_path / "b", capsys)
    differing = sorted(k for k in files_a if files_a[k] != files_b[k])
    same_query = query_a == query_b and query_a.strip() != ""

    baseline, _ = build_mini()
    want = baseline.ws.graph.dumps()
    docs, by_doc = mini_inputs()
    boundaries = [c.chunk_id for d in docs for c in by_doc[d.doc_id]]
    resume_bad = []
    for cid in boundaries:
        cp = tmp_path / f"cp-{cid.replace(':', '-')}"
        crashing = CrashingPolicy(mini_policy(), cid)
        try:
            build_mini(crashing, checkpoint_dir=cp)
            resume_bad.append((cid, "did not crash"))
            continue
        except UnrecoverableError:
            pass
        docs, by_doc = mini_inputs()
        s = Session.resume(cp, mini_policy(), HashingEmbedder(64), AgentConfig(), sleep=no_sleep)
        s.run(docs, by_doc)
        if s.ws.graph.dumps() != want:
            resume_bad.append((cid, "snapshot differs"))
    ok = not differing and same_query and not resume_bad
    report(6, "end-to-end determinism", ok,
           f"differing artifacts={differing}, query outputs identical={same_query}, "
           f"resume boundaries={len(boundaries)}, resume failures={resume_bad}")
    assert ok


# 7 ---------------------------------------------------------------------------


def test_provenance_totality(built_mini):
    session, _ = built_mini
    ws = session.ws
    objects = [e.entity_id for e in ws.graph.entities(ws.scope)]
    objects += [r.relation_id for r in ws.graph.relations(ws.scope)]
    missing = []
    for oid in objects:
        recs = [r for r in ws.ledger.records if r.object_id == oid]
        verified = [
            r for r in recs
            if r.source_chunk_id in ws.chunks and r.evidence_snippet
            and r.evidence_snippet in ws.chunks[r.source_chunk_id].text
        ]
        if not verified:
            missing.append(oid)
    covered = len(objects) - len(missing)
    ok = objects and not missing
    report(7, "provenance totality", bool(ok),
           f"{covered}/{len(objects)} live objects with a verified evidence record")
    assert ok


# 8 ---------------------------------------------------------------------------

GATE_CASES = [
    ("A" * 61, "LENGTH"),
    ("", "LENGTH"),
    ("   ", "LENGTH"),
    ("x" * 100, "LENGTH"),
    ("Graph " * 11, "LENGTH"),
    ("abcd\x00\x01\x02\x03", "PRINTABLE_RATIO"),
    ("ab\x07\x08\x1b", "PRINTABLE_RATIO"),
    ("Res\u200bNet\u200b\u200b\u200b\u200b\u200b", "PRINTABLE_RATIO"),
    ("\t\tX\t", "PRINTABLE_RATIO"),
    ("Data\n\n\n\n\n", "PRINTABLE_RATIO"),
    ("the proposed method is effective", "SENTENCE_FRAGMENT"),
    ("and attention layers", "SENTENCE_FRAGMENT"),
    ("a very long list of many different words here", "SENTENCE_FRAGMENT"),
    ("Graph neural networks.", "SENTENCE_FRAGMENT"),
    ("models have improved", "SENTENCE_FRAGMENT"),
    ("def forward", "CODE_KEYWORD"),
    ("import torch", "CODE_KEYWORD"),
    ("model.fit()", "CODE_KEYWORD"),
    ("config{dim}", "CODE_KEYWORD"),
    ("x == y", "CODE_KEYWORD"),
    ("$x^2$", "MATH_FORMULA"),
    ("\\alpha decay", "MATH_FORMULA"),
    ("E = mc2", "MATH_FORMULA"),
    ("x_i", "MATH_FORMULA"),
    ("3 + 4", "MATH_FORMULA"),
    ("!!!", "PUNCTUATION_FLOOD"),
    ("A.B.C.", "PUNCTUATION_FLOOD"),
    ("#-#-#", "PUNCTUATION_FLOOD"),
    ("(*)", "PUNCTUATION_FLOOD"),
    ("--x--", "PUNCTUATION_FLOOD"),
    ("Res\ufffdNet", "PDF_GARBLED"),
    ("(cid:12)Net", "PDF_GARBLED"),
    ("e\ufb03cient", "PDF_GARBLED"),
    ("M\u00c3\u00a9thode", "PDF_GARBLED"),
    ("trans\u00adformer", "PDF_GARBLED"),
    ("Introduction", "GENERIC_HEADING"),
    ("2.1 Related Work", "GENERIC_HEADING"),
    ("Figure 3", "GENERIC_HEADING"),
    ("Conclusions:", "GENERIC_HEADING"),
    ("IV. Experiments", "GENERIC_HEADING"),
]


def test_quality_gate_fixture():
    gate = QualityGate()
    wrong = [(name, want, gate(name).rule) for name, want in GATE_CASES if gate(name).rule != want]
    per_rule = {rule for _, rule in GATE_CASES}
    ok = len(GATE_CASES) == 40 and len(per_rule) == 8 and not wrong
    report(8, "quality gate", ok, f"{len(GATE_CASES) - len(wrong)}/{len(GATE_CASES)} cases, "
           f"{len(per_rule)} rule classes, misclassified={wrong}")
    assert ok


# 9 ---------------------------------------------------------------------------

_VOCAB = ["the", "a", "an", "cat", "Cat", "dog", "dog.", "bird", "graph", "GRAPH", "model,", "net", "(net)", "x"]


def _answer(rng: random.Random) -> str:
    r = rng.random()
    if r < 0.1:
        return "UNANSWERABLE"
    if r < 0.15:
        return ""
    return " ".join(rng.choice(_VOCAB) for _ in range(rng.randint(1, 6)))


def _evidence(rng: random.Random) -> list[str]:
    return rng.sample([f"p{i}" for i in range(6)], rng.randint(0, 4))


def test_metric_oracle():
    rng = random.Random(9)
    mismatches = 0
    for _ in range(20):
        instances, preds, plain, oracle_preds = [], [], [], {}
        for q in range(rng.randint(1, 8)):
            qid = f"q{q}"
            anns = [(_answer(rng), _evidence(rng)) for _ in range(rng.randint(1, 3))]
            instances.append(QAInstance(qid, "?", "doc", tuple(Annotation(a, frozenset(e)) for a, e in anns)))
            plain.append({"question_id": qid, "annotators": [{"answer": a, "evidence": e} for a, e in anns]})
            ans, ev, ret = _answer(rng), _evidence(rng), _evidence(rng)
            preds.append(PredictionRecord(qid, ans, ret, ev))
            oracle_preds[qid] = (ans, ev, ret)
            for a, e in anns:
                if answer_f1(ans, a) != oracles.answer_f1(ans, a):
                    mismatches += 1
                if evidence_f1(ev, e) != oracles.evidence_f1(ev, e):
                    mismatches += 1
        got = score_dataset(preds, instances)
        want = oracles.dataset_scores(oracle_preds, plain)
        mismatches += sum(got[k] != want[k] for k in want)

    both_empty = answer_f1("UNANSWERABLE", "UNANSWERABLE") == 1.0 and evidence_f1([], []) == 1.0
    worked = answer_f1("cat dog bird", "cat dog")
    worked_ev = evidence_f1(["p1", "p2", "p3"], ["p1", "p2"])
    max_over = score_dataset(
        [PredictionRecord("q", "cat", [], ["p1"])],
        [QAInstance("q", "?", "d", (Annotation("dog", frozenset({"p2"})), Annotation("cat", frozenset({"p1"}))))],
    )["answer_f1_mean"] == 1.0
    ok = (mismatches == 0 and both_empty and max_over
          and abs(worked - 0.8) < 1e-12 and abs(worked_ev - 0.8) < 1e-12)
    report(9, "metric oracle", ok,
           f"20 fixtures, mismatches={mismatches}, both-empty=1: {both_empty}, max-over-annotators: {max_over}, "
           f"worked example F1={worked:.12f}")
    assert ok


# 10 --------------------------------------------------------------------------

_NAMES = ["Alpha", "Beta", "Gamma", "Delta", "Epsilon", "Zeta"]
_BATCH_DOC = Document(
    "batchdoc",
    "Batch fixture",
    "Alpha uses Beta for training.\n\nGamma is related to Delta and Alpha.\n\n"
    "Epsilon extends Zeta, and Beta is part of Gamma.\n\nDelta and Epsilon are compared with Zeta.\n",
)


def _batch_workspace():
    ws = fresh_workspace()
    chunks = chunk_document(_BATCH_DOC, ChunkerConfig(Strategy.PARAGRAPH))
    ws.add_chunks(chunks, _BATCH_DOC.title)
    return ws, chunks


def _random_batch(rng: random.Random, chunks) -> dict:
    def mention(name):
        hits = [c for c in chunks if name in c.text]
        c = rng.choice(hits)
        return c.chunk_id, name

    creates, updates, merges, deletes = [], [], [], []
    for _ in range(rng.randint(1, 6)):
        name = rng.choice(_NAMES)
        cid, ev = mention(name)
        if rng.random() < 0.1:
            ev = "not in the text"
        creates.append({"kind": "entity", "name": name, "entity_type": "Concept", "source_chunk": cid,
                        "evidence": ev, "certainty": round(rng.uniform(0.5, 1.0), 2)})
    if rng.random() < 0.2:
        creates.append({"kind": "entity", "name": "Introduction", "entity_type": "Concept",
                        "source_chunk": chunks[0].chunk_id, "evidence": "Alpha"})
    for _ in range(rng.randint(0, 4)):
        h, t = rng.sample(_NAMES, 2)
        c = rng.choice(chunks)
        creates.append({"kind": "relation", "head": h, "tail": t, "source_chunk": c.chunk_id,
                        "relation_type": rng.choice(["USES", "RELATED_TO", "PART_OF", "COMPARED_WITH"]),
                        "evidence": c.text[: rng.randint(5, 20)]})
    for _ in range(rng.randint(0, 2)):
        name = rng.choice(_NAMES)
        updates.append({"kind": "entity", "entity_name": name,
                        "updates": {"description": f"about {name}", "aliases": [name.upper()]}})
    if rng.random() < 0.5:
        a, b = rng.sample(_NAMES, 2)
        merges.append({"kind": "entity", "target_name": a, "source_name": b})
    if rng.random() < 0.3:
        deletes.append({"kind": "entity", "entity_name": rng.choice(_NAMES), "reason": "fixture"})
    batch = {"searches": [{"query": rng.choice(_NAMES), "search_type": "FUZZY"}]}
    for key, items in (("creates", creates), ("updates", updates), ("merges", merges), ("deletes", deletes)):
        if items:
            batch[key] = items
    return batch


def _store_state(ws) -> tuple:
    vectors = [(r.vec_id, r.object_id, r.embedding.tobytes(), dict(r.payload)) for r in ws.index.records()]
    ledger = [r.to_dict() for r in ws.ledger.records]
    return ws.graph.dumps(), vectors, ledger, json.dumps(ws.schema.profile.to_dict(), sort_keys=True)


def test_batch_equals_standalone_calls():
    rng = random.Random(10)
    differing = 0
    sub_ops = 0
    for _ in range(50):
        ws_a, chunks = _batch_workspace()
        ws_b, _ = _batch_workspace()
        seed_ops = [{"name": n, "entity_type": "Concept", "source_chunk": c, "evidence": n}
                    for n in rng.sample(_NAMES, 2) for c in [next(x.chunk_id for x in chunks if n in x.text)]]
        kit_a, kit_b = Toolkit(ws_a), Toolkit(ws_b)
        st_a, st_b = ToolState(), ToolState()
        for op in seed_ops:
            kit_a.invoke("create_entity", op, st_a)
            kit_b.invoke("create_entity", op, st_b)

        batch = _random_batch(rng, chunks)
        kit_a.invoke("batch_kg_operations", batch, st_a)
        for q in batch["searches"]:
            kit_b.invoke("search_kg", q, st_b)
        tools = {"creates": "create", "updates": "update", "merges": "merge", "deletes": "delete"}
        for category, verb in tools.items():
            for item in batch.get(category, []):
                args = {k: v for k, v in item.items() if k != "kind"}
                sub_ops += 1
                try:
                    kit_b.invoke(f"{verb}_{item['kind']}", args, st_b)
                except Exception:
                    pass
        if _store_state(ws_a) != _store_state(ws_b):
            differing += 1
    ok = differing == 0
    report(10, "batch equivalence", ok, f"50 batches, {sub_ops} sub-operations, differing final states={differing}")
    assert ok


# 11 --------------------------------------------------------------------------


def _fuzz_document(rng: random.Random, i: int) -> Document:
    words = ["graph", "node", "edge", "vector", "chunk", "model", "token", "query", "index", "score"]

    def sentence(punct: bool = True) -> str:
        s = " ".join(rng.choice(words) for _ in range(rng.randint(3, 15)))
        return s + (rng.choice([".", "?", "!", "。"]) if punct else "")

    blocks = []
    for _ in range(rng.randint(1, 12)):
        kind = rng.random()
        if kind < 0.15:
            blocks.append("#" * rng.randint(1, 3) + " " + sentence(False).title())
        elif kind < 0.25:
            blocks.append("```\n" + "\n".join(sentence(False) for _ in range(rng.randint(1, 4))) + "\n```")
        elif kind < 0.32:
            blocks.append("| a | b |\n|---|---|\n| 1 | 2 |")
        elif kind < 0.4:
            blocks.append("\n".join("- " + sentence(False) for _ in range(rng.randint(1, 4))))
        elif kind < 0.5:
            blocks.append(" ".join(sentence(False) for _ in range(rng.randint(1, 8))))  # no punctuation
        else:
            blocks.append(" ".join(sentence() for _ in range(rng.randint(1, 6))))
    seps = ["\n\n", "\n\n\n\n", "\n \n\t\n", "\n"]
    body = ""
    for b in blocks:
        body += b + rng.choice(seps)
    if i % 4 == 0:
        body = "\n\n\n" + body  # leading empty paragraphs
    if i % 5 == 0:
        body = body.rstrip("\n")
    if i == 7:
        body = " ".join(rng.choice(words) for _ in range(400))  # one long run with no punctuation
    return Document(f"fuzz{i:02d}", f"Fuzz {i}", body)


def test_chunker_reconstruction_fuzz():
    rng = random.Random(11)
    docs = [_fuzz_document(rng, i) for i in range(20)]
    failures = []
    checked = 0
    for strategy in Strategy:
        for size, overlap in ((60, 0), (200, 0), (120, 30)):
            cfg = ChunkerConfig(strategy, size, overlap)
            for doc in docs:
                chunks = chunk_document(doc, cfg)
                checked += 1
                if "".join(c.core for c in chunks) != doc.body:
                    failures.append((doc.doc_id, strategy.value, size, "reconstruction"))
                if overlap == 0 and "".join(c.text for c in chunks) != doc.body:
                    failures.append((doc.doc_id, strategy.value, size, "plain join"))
                if any(b.pos <= a.pos for a, b in zip(chunks, chunks[1:])):
                    failures.append((doc.doc_id, strategy.value, size, "monotonicity"))
                if [c.index for c in chunks] != list(range(len(chunks))):
                    failures.append((doc.doc_id, strategy.value, size, "indices"))
                if strategy is Strategy.FIXED_SIZE and any(len(c.text) > size for c in chunks):
                    failures.append((doc.doc_id, strategy.value, size, "size bound"))
    ok = not failures
    report(11, "chunker reconstruction", ok,
           f"20 docs x 4 strategies x 3 configs = {checked} chunkings, failures={failures[:5]}")
    assert ok
