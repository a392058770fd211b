import json
import shutil

import pytest

from kgweave.cli import main
from kgweave.config import load_run_config

MANIFEST = "bundled:minicorpus/manifest.jsonl"
SCRIPT = "bundled:minicorpus/script.json"
QA = "bundled:minicorpus/qa.jsonl"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    rows = [json.loads(line) for line in out.splitlines() if line.strip()]
    return code, rows, err


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    root = tmp_path_factory.mktemp("runs")
    common = ["--root", str(root), "--run-id", "r1", "--tenant", "t"]
    assert main(["ingest", MANIFEST, *common]) == 0
    assert main(["build", "--script", SCRIPT, *common]) == 0
    return root, common


def test_ingest_writes_artifacts(tmp_path, capsys):
    code, rows, err = run(capsys, "ingest", MANIFEST, "--root", str(tmp_path), "--strategy", "PARAGRAPH")
    assert code == 0 and rows[0]["chunk_id"].endswith(":0000")
    assert "chunk_id" in err
    run_dir = tmp_path / "default" / "run-0"
    assert {p.name for p in run_dir.iterdir()} == {"documents.jsonl", "chunks.jsonl", "run.json"}
    assert json.loads((run_dir / "run.json").read_text())["strategy"] == "PARAGRAPH"


def test_build_before_ingest_is_missing_artifacts(tmp_path, capsys):
    code, _, err = run(capsys, "build", "--script", SCRIPT, "--root", str(tmp_path))
    assert code == 4 and "graph_store" not in err and "MissingArtifacts" in err


def test_build_without_policy_is_usage_error(tmp_path, capsys):
    main(["ingest", MANIFEST, "--root", str(tmp_path)])
    capsys.readouterr()
    code, _, err = run(capsys, "build", "--root", str(tmp_path))
    assert code == 2 and "--script" in err


def test_build_report_and_clean_backends(built, capsys):
    root, common = built
    report = json.loads((root / "t" / "r1" / "report.json").read_text())
    assert report["chunks_archived"] == 10 and report["graph_counts"]["entities"] == 9
    code, _, err = run(capsys, "build", "--script", SCRIPT, "--require-clean-backends", *common)
    assert code == 3 and "ScopeNotClean" in err


def test_query_modes(built, capsys):
    _, common = built
    code, rows, _ = run(capsys, "query", "Which dataset is GAT evaluated on?", "--mode", "fusion", *common)
    assert code == 0
    assert rows[0]["mode"] == "FUSION" and rows[0]["fallback"] is False
    assert [r["rank"] for r in rows[1:]] == list(range(1, len(rows)))
    code, rows, _ = run(capsys, "query", "attention", "--mode", "VECTOR", "--top-k", "2", *common)
    assert rows[0]["mode"] == "VECTOR" and len(rows) == 3


def test_query_without_build(tmp_path, capsys):
    code, _, _ = run(capsys, "query", "x", "--root", str(tmp_path))
    assert code == 4


def test_trace_by_entity_name(built, capsys):
    _, common = built
    code, rows, _ = run(capsys, "trace", "--entity", "Cora", *common)
    assert code == 0 and rows[0]["operation"] == "CREATE"
    eid = rows[0]["object_id"]
    # relations touching the entity are part of its trace
    assert all(r["object_id"] == eid or eid in r["related_ids"] for r in rows)
    code, rows, _ = run(capsys, "trace", "--operation", "MERGE", *common)
    assert len(rows) == 1


def test_check_clean_then_inconsistent(built, tmp_path, capsys):
    root, common = built
    code, rows, _ = run(capsys, "check", *common)
    assert code == 0 and rows[0]["clean"] is True
    shutil.copytree(root / "t" / "r1", tmp_path / "t" / "r1")
    vec = tmp_path / "t" / "r1" / "vectors.jsonl"
    header, *recs = [json.loads(line) for line in vec.read_text().splitlines()]
    recs = [r for r in recs if r["collection"] != "ENTITY"]
    vec.write_text("".join(json.dumps(r) + "\n" for r in [dict(header, count=len(recs)), *recs]))
    code, rows, _ = run(capsys, "check", "--root", str(tmp_path), "--run-id", "r1", "--tenant", "t")
    assert code == 5 and rows[0]["clean"] is False


def test_eval_with_and_without_predictions(built, tmp_path, capsys):
    _, common = built
    out = tmp_path / "preds.jsonl"
    code, rows, _ = run(capsys, "eval", QA, "--out", str(out), *common)
    assert code == 0 and rows[0]["questions"] > 0 and rows[0]["unresolved_evidence"] == 0
    code, again, _ = run(capsys, "eval", QA, "--predictions", str(out), *common)
    assert code == 0
    assert {k: again[0][k] for k in ("answer_f1_mean", "evidence_f1_mean")} == \
        {k: rows[0][k] for k in ("answer_f1_mean", "evidence_f1_mean")}


def test_schemas_command(tmp_path, capsys):
    code, rows, _ = run(capsys, "schemas", str(tmp_path))
    assert code == 0 and len(rows) == 16
    assert (tmp_path / "create_entity.schema.json").exists()


def test_bad_flag_exits_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["query", "x", "--mode", "sideways"])
    assert exc.value.code == 2


def test_config_precedence(tmp_path):
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(json.dumps({"llm_timeout": 10, "max_rounds": 4, "retrieval": {"top_k": 3}}))
    cfg = load_run_config(cfg_file, {"max_rounds": 6, "run_id": None}, env={"LLM_TIMEOUT": "20"})
    assert (cfg.llm_timeout, cfg.max_rounds, cfg.run_id) == (20.0, 6, "run-0")
    assert cfg.retrieval.top_k == 3 and cfg.retrieval.rrf_k == 60
    cfg_file.write_text(json.dumps({"nope": 1}))
    with pytest.raises(ValueError):
        load_run_config(cfg_file, env={})
    with pytest.raises(ValueError):
        load_run_config(None, {"clock": "sundial"}, env={})
