"""End-to-end run over the bundled mini corpus: ingest, build with the
scripted policy, query in every mode, check, and evaluate.

    python3 scripts/run_minicorpus.py [--root DIR]
"""

import argparse
import tempfile

from kgweave.cli import main

MANIFEST = "bundled:minicorpus/manifest.jsonl"
SCRIPT = "bundled:minicorpus/script.json"
QA = "bundled:minicorpus/qa.jsonl"


def step(title: str, argv: list[str]) -> None:
    print(f"\n== {title}", flush=True)
    code = main(argv)
    if code != 0:
        raise SystemExit(f"{title} exited with {code}")


def run(root: str) -> None:
    common = ["--root", root, "--run-id", "mini", "--tenant", "demo", "--dataset", "minicorpus"]
    step("ingest", ["ingest", MANIFEST, *common])
    step("build", ["build", "--script", SCRIPT, *common])
    for mode in ("VECTOR", "KG", "FUSION", "DEEP"):
        step(f"query {mode}", ["query", "Which dataset is GAT evaluated on?", "--mode", mode, "--top-k", "3",
                               *common])
    step("trace Cora", ["trace", "--entity", "Cora", *common])
    step("check", ["check", *common])
    step("eval", ["eval", QA, *common])


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--root", help="runs directory; a temporary one when omitted")
    args = ap.parse_args()
    if args.root:
        run(args.root)
    else:
        with tempfile.TemporaryDirectory() as tmp:
            run(tmp)
