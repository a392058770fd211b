import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgweave.corpus import Document
from kgweave.schema import (
    GENERIC_RELATIONS,
    RelationState,
    SchemaProfile,
    SchemaRegistry,
    TTLCache,
    bootstrap,
    evolve,
    generic_profile,
    is_valid_relation_name,
    normalize_relation_name,
    promote,
    validate,
)
from kgweave.vector_index import HashingEmbedder

EMB = HashingEmbedder(64)
DOCS = [Document("d1", "t", "Graph neural networks aggregate neighbour features. " * 10)]


@pytest.mark.parametrize("raw,want", [
    ("worksAt", "WORKS_AT"),
    ("works at", "WORKS_AT"),
    ("works-at", "WORKS_AT"),
    ("  evaluated_on ", "EVALUATED_ON"),
])
def test_normalize_relation_name(raw, want):
    assert normalize_relation_name(raw) == want
    assert is_valid_relation_name(want)


def test_invalid_names():
    assert not is_valid_relation_name("")
    assert not is_valid_relation_name("9LIVES")


def test_validate_classifies_candidates():
    prof = SchemaProfile("ml", [], ["Method", "Dataset"])
    res = validate(
        [
            {"name": "evaluatedOn", "domain_label": "Method", "range_label": "Dataset", "quality_score": 0.9},
            {"name": "evaluated on", "domain_label": "Method", "range_label": "Dataset", "quality_score": 0.9},
            {"name": "hosts", "domain_label": "Venue", "range_label": "Method"},
            {"name": "???", "domain_label": "Method", "range_label": "Method"},
            {"name": "inspires", "domain_label": "Method", "range_label": "Method", "quality_score": 0.2},
        ],
        prof,
        EMB,
    )
    assert [r.name for r in res.accepted] == ["EVALUATED_ON"]
    assert res.merged == [("EVALUATED_ON", "EVALUATED_ON")]
    assert ("HOSTS", "unresolved_label") in res.rejected
    assert ("???", "invalid_name") in res.rejected
    assert [(r.name, r.state) for r in res.candidates] == [("INSPIRES", RelationState.PROPOSED)]


def test_evolve_reuses_or_proposes():
    prof = generic_profile()
    same, rel, reused = evolve(prof, "uses", EMB)
    assert reused and rel.name == "USES" and same is prof
    new, rel, reused = evolve(prof, "fine tunes", EMB)
    assert not reused and rel.state is RelationState.PROPOSED
    assert new.version == prof.version + 1 and prof.relation("FINE_TUNES") is None
    assert new.ledger[-1] == {"version": new.version, "event": "propose", "detail": "FINE_TUNES"}
    with pytest.raises(ValueError):
        evolve(prof, "!!!", EMB)


def test_promote():
    prof, _, _ = evolve(generic_profile(), "fine tunes", EMB)
    up = promote(prof, "FINE_TUNES")
    assert up.relation("FINE_TUNES").state is RelationState.ACTIVE and up.version == prof.version + 1
    assert promote(up, "FINE_TUNES") is up
    with pytest.raises(KeyError):
        promote(up, "NOPE")


def test_bootstrap_uses_discovery_and_falls_back():
    found = {"domain_label": "graphs", "entity_labels": ["Method"],
             "relation_types": [{"name": "extends", "domain_label": "Method", "range_label": "Method"}]}
    prof = bootstrap(DOCS, lambda samples: found, EMB)
    assert prof.domain_label == "graphs" and [r.name for r in prof.relation_types] == ["EXTENDS"]
    assert prof.prefix_embedding is not None

    def boom(samples):
        raise RuntimeError("offline")

    fallback = bootstrap(DOCS, boom, EMB)
    assert fallback.domain_label == "general"
    assert [r.name for r in fallback.relation_types] == list(GENERIC_RELATIONS)
    assert bootstrap([], None, EMB).domain_label == "general"


def test_bootstrap_reuses_similar_registered_profile():
    known = bootstrap(DOCS, lambda s: {"domain_label": "graphs"}, EMB)
    again = bootstrap(DOCS, lambda s: pytest.fail("discovery should be skipped"), EMB, [known])
    assert again.domain_label == "graphs" and again is not known


def test_bootstrap_discovery_timeout():
    from kgweave.schema import SchemaConfig

    def slow(samples):
        time.sleep(0.5)
        return {"domain_label": "late"}

    prof = bootstrap(DOCS, slow, EMB, cfg=SchemaConfig(discovery_timeout=0.05))
    assert prof.domain_label == "general"


def test_profile_roundtrip(tmp_path):
    prof, _, _ = evolve(generic_profile(), "fine tunes", EMB)
    prof.export(tmp_path / "s.json")
    assert SchemaProfile.load(tmp_path / "s.json").to_dict() == prof.to_dict()
    with pytest.raises(ValueError):
        SchemaProfile.from_dict({**prof.to_dict(), "format_version": 99})


def test_ttl_cache_expiry():
    t = [0.0]
    cache = TTLCache(ttl=10, now=lambda: t[0])
    cache.put("k", 1)
    assert cache.get("k") == 1
    t[0] = 10.0
    assert cache.get("k") is None


def test_registry_resolve_updates_profile():
    reg = SchemaRegistry(generic_profile(), EMB)
    rel, new = reg.resolve("COMPARED_WITH")
    assert new and reg.profile.relation("COMPARED_WITH") is not None
    rel, new = reg.resolve("compared with")
    assert not new
    reg.promote("COMPARED_WITH")
    assert reg.profile.relation("COMPARED_WITH").state is RelationState.ACTIVE
    assert reg.cache.get("general") is reg.profile


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(["uses", "fine tunes", "cites", "compared with", "Extends", "trained on"]),
                max_size=12))
def test_version_never_decreases_and_is_ledgered(patterns):
    reg = SchemaRegistry(generic_profile(), EMB)
    last = reg.profile.version
    for p in patterns:
        reg.resolve(p)
        assert reg.profile.version >= last
        last = reg.profile.version
    versions = [e["version"] for e in reg.profile.ledger if e["event"] != "bootstrap_fallback"]
    assert versions == list(range(2, reg.profile.version + 1))
