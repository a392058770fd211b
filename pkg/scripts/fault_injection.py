"""Hammer the KG/vector sync path with a vector index that fails at a
given rate and report what the compensation logic left behind.

    python3 scripts/fault_injection.py --p 0.3 --calls 500 --seed 4
"""

import argparse
import json
import random
from collections import Counter

from kgweave.faults import FlakyVectorIndex
from kgweave.graph_store import Entity, GraphStore
from kgweave.sync import AlertLog, SyncCoordinator
from kgweave.vector_index import HashingEmbedder


def run(p: float, calls: int, seed: int, names: int = 200, dim: int = 64) -> dict:
    rng = random.Random(seed)
    index = FlakyVectorIndex(dim, p=p, seed=seed)
    graph, alerts = GraphStore(), AlertLog()
    sync = SyncCoordinator(graph, index, HashingEmbedder(dim), alerts)
    statuses = Counter()
    for call in range(calls):
        name = f"Entity {rng.randrange(names)}"
        ent = Entity("ent-" + name.replace(" ", "-"), name, "Concept", description=f"revision {call}")
        statuses[sync.sync_object(ent).status.value] += 1
    alerted = {a.object_id for a in alerts}
    orphans = [e.entity_id for e in graph.entities() if e.embedding_ref is None and e.entity_id not in alerted]
    audit = sync.consistency_check()
    return {
        "p": p,
        "calls": calls,
        "injected_failures": index.failures,
        "outcomes": dict(sorted(statuses.items())),
        "alerts": Counter(a.action for a in alerts),
        "entities": len(graph.entities()),
        "vectors": len(index),
        "orphans": len(orphans),
        "orphan_vectors": len(audit.orphan_vectors),
        "dangling_refs": len(audit.dangling_refs),
    }


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=float, default=0.3)
    ap.add_argument("--calls", type=int, default=500)
    ap.add_argument("--seed", type=int, default=4)
    args = ap.parse_args()
    print(json.dumps(run(args.p, args.calls, args.seed), indent=2))
