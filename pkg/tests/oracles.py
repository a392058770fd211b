"""Independent brute-force reference implementations used as test oracles.

Written without touching package internals so a shared bug cannot hide.
"""

from __future__ import annotations

import math
import string

INF = float("inf")


def rrf(streams: list[list[str]], k: int = 60) -> list[tuple[str, float]]:
    items = sorted({x for s in streams for x in s})
    scored = []
    for x in items:
        total = 0.0
        for s in streams:
            for pos in range(len(s)):
                if s[pos] == x:
                    total += 1.0 / (k + pos + 1)
        scored.append((x, total))
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored


def exhaustive_search(records, q, k, keep) -> list[tuple[str, float]]:
    """records: iterable of (object_id, vector, meta); keep(meta) filters."""
    out = []
    for oid, vec, meta in records:
        if not keep(meta):
            continue
        d = math.sqrt(sum((a - b) ** 2 for a, b in zip(vec, q)))
        out.append((oid, 1.0 / (1.0 + d)))
    out.sort(key=lambda t: (-t[1], t[0]))
    return out[:k]


def floyd_warshall(nodes: list[str], edges: list[tuple[str, str]]) -> dict[tuple[str, str], float]:
    d = {(a, b): (0 if a == b else INF) for a in nodes for b in nodes}
    for a, b in edges:
        d[a, b] = min(d[a, b], 1)
        d[b, a] = min(d[b, a], 1)
    for m in nodes:
        for a in nodes:
            for b in nodes:
                if d[a, m] + d[m, b] < d[a, b]:
                    d[a, b] = d[a, m] + d[m, b]
    return d


def within_hops(nodes, edges, seeds, h) -> set[str]:
    d = floyd_warshall(nodes, edges)
    return {n for n in nodes if n not in seeds and min(d[s, n] for s in seeds) <= h}


_DROP = str.maketrans("", "", string.punctuation)


def tokens(s) -> list[str]:
    if s is None or s.strip() == "UNANSWERABLE":
        return []
    words = s.lower().translate(_DROP).split()
    return [w for w in words if w not in ("a", "an", "the")]


def f1_lists(pred: list, gold: list) -> float:
    if not pred and not gold:
        return 1.0
    remaining = list(gold)
    common = 0
    for t in pred:
        if t in remaining:
            remaining.remove(t)
            common += 1
    if common == 0:
        return 0.0
    p = common / len(pred)
    r = common / len(gold)
    return 2 * p * r / (p + r)


def answer_f1(pred, gold) -> float:
    return f1_lists(tokens(pred), tokens(gold))


def evidence_f1(pred, gold) -> float:
    return f1_lists(sorted(set(pred)), sorted(set(gold)))


def dataset_scores(preds: dict, instances: list[dict]) -> dict:
    """preds: qid -> (answer, evidence, retrieved); instances: plain dicts."""
    sums = {"answer_f1_mean": 0.0, "evidence_f1_mean": 0.0, "retrieved_evidence_f1_mean": 0.0}
    for inst in instances:
        ans, ev, ret = preds[inst["question_id"]]
        golds = inst["annotators"]
        sums["answer_f1_mean"] += max(answer_f1(ans, g["answer"]) for g in golds)
        sums["evidence_f1_mean"] += max(evidence_f1(ev, g["evidence"]) for g in golds)
        sums["retrieved_evidence_f1_mean"] += max(evidence_f1(ret, g["evidence"]) for g in golds)
    n = len(instances)
    return {k: v / n for k, v in sums.items()}
