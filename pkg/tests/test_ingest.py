import json
import logging
import random
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kbspace.ingest import (
    FORMAT_VERSION,
    IngestError,
    IntegerCoding,
    aggregate_reified,
    build_index,
    encode_items,
    ingest,
    read_facts,
    read_triples,
)
from kbspace.store import BundleError, KnowledgeBase
from kbspace.types import ItemKind, ItemRecord, RawFact, RawTriple

from helpers import make_kb, random_facts
from oracles import naive_ni

WC_TRIPLES = [
    RawTriple("wc2018_final", "P_participating_team", "fact:1"),
    RawTriple("fact:1", "P_participating_team", "france_team"),
    RawTriple("fact:1", "P_location", "luzhniki"),
    RawTriple("fact:1", "P_point_in_time", '"15 July 2018"'),
]


def test_reified_world_cup_fact():
    facts = aggregate_reified(WC_TRIPLES)
    assert facts == [
        RawFact(
            "wc2018_final",
            "P_participating_team",
            "france_team",
            (("P_location", "luzhniki"), ("P_point_in_time", '"15 July 2018"')),
        )
    ]


def test_plain_triple_passes_through():
    assert aggregate_reified([RawTriple("A", "p", "B")]) == [RawFact("A", "p", "B", ())]


def test_groups_with_one_two_three_qualifiers():
    triples = []
    for g, n_q in enumerate((1, 2, 3)):
        fid = f"fact:{g}"
        triples.append(RawTriple(f"s{g}", "p", fid))
        triples.append(RawTriple(fid, "p", f"o{g}"))
        triples += [RawTriple(fid, f"q{j}", f"v{j}") for j in range(n_q)]
    facts = aggregate_reified(triples)
    assert [len(f.qualifiers) for f in facts] == [1, 2, 3]
    assert all(not f.object.startswith("fact:") for f in facts)


def test_body_before_head_is_joined():
    triples = [WC_TRIPLES[2], WC_TRIPLES[1], WC_TRIPLES[0], WC_TRIPLES[3]]
    (fact,) = aggregate_reified(triples)
    assert fact.object == "france_team"
    assert fact.qualifiers == (("P_location", "luzhniki"), ("P_point_in_time", '"15 July 2018"'))


@pytest.mark.parametrize(
    "triples, fid",
    [
        ([RawTriple("fact:9", "q", "v")], "fact:9"),
        ([RawTriple("s", "p", "fact:9")], "fact:9"),
        ([RawTriple("s", "p", "fact:9"), RawTriple("fact:9", "q", "v")], "fact:9"),
    ],
)
def test_orphan_groups_are_rejected(triples, fid):
    with pytest.raises(IngestError, match=fid):
        aggregate_reified(triples)


def test_duplicate_head_is_rejected():
    with pytest.raises(IngestError, match="fact:1"):
        aggregate_reified(WC_TRIPLES + [RawTriple("other", "P_participating_team", "fact:1")])


def test_custom_fact_prefix():
    triples = [RawTriple("s", "p", "_:x"), RawTriple("_:x", "p", "o"), RawTriple("_:x", "q", "v")]
    assert aggregate_reified(triples, fact_prefix="_:") == [RawFact("s", "p", "o", (("q", "v"),))]


@settings(max_examples=60, deadline=None)
@given(st.randoms(use_true_random=False))
def test_aggregation_is_order_insensitive(rnd):
    triples = []
    for g in range(rnd.randint(1, 6)):
        fid = f"fact:{g}"
        triples.append(RawTriple(f"s{g}", f"p{g % 2}", fid))
        triples.append(RawTriple(fid, f"p{g % 2}", f"o{g}"))
        triples += [RawTriple(fid, f"q{j}", f"v{g}{j}") for j in range(rnd.randint(0, 3))]
    triples += [RawTriple(f"a{i}", "r", f"b{i}") for i in range(rnd.randint(0, 4))]
    shuffled = triples[:]
    rnd.shuffle(shuffled)

    def canon(facts):
        # qualifier order carries no meaning, compare as multisets
        return Counter((f.subject, f.predicate, f.object, tuple(sorted(f.qualifiers))) for f in facts)

    assert canon(aggregate_reified(shuffled)) == canon(aggregate_reified(triples))


def test_read_triples_skips_malformed_lines(tmp_path, caplog):
    path = tmp_path / "t.tsv"
    path.write_text("a\tp\tb\nbroken line\n\n# comment\nc\tp\td\nx\t\ty\n", encoding="utf-8")
    with caplog.at_level(logging.WARNING):
        triples, skipped = read_triples(path)
    assert triples == [RawTriple("a", "p", "b"), RawTriple("c", "p", "d")]
    assert skipped == 2
    assert caplog.records


def test_read_facts_skips_malformed_lines(tmp_path):
    path = tmp_path / "f.jsonl"
    rows = [
        json.dumps({"s": "a", "p": "p", "o": "b", "qualifiers": [["q", "c"]]}),
        "{not json",
        json.dumps({"s": "a", "p": "p"}),
        json.dumps({"s": "a", "p": "p", "o": "c"}),
    ]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    facts, skipped = read_facts(path)
    assert facts == [RawFact("a", "p", "b", (("q", "c"),)), RawFact("a", "p", "c", ())]
    assert skipped == 2


# -- integer coding ------------------------------------------------------------


def test_coding_is_a_bijection():
    coding = IntegerCoding(["a", "b", "c", "d", "e"])
    assert sorted(coding.encode(x) for x in "abcde") == [0, 1, 2, 3, 4]
    assert all(coding.decode(coding.encode(x)) == x for x in "abcde")
    with pytest.raises(KeyError):
        coding.encode("zzz")


def test_shared_subject_gets_one_code():
    records = [ItemRecord(x, x) for x in ("s", "p", "o1", "o2")]
    facts = [RawFact("s", "p", "o1"), RawFact("s", "p", "o2")]
    coding, out = encode_items(records, facts)
    assert len(coding) == 4 and len(out) == 4


def test_literals_registered_after_declared_items():
    records = [ItemRecord(x, x) for x in ("s", "p")]
    facts = [RawFact("s", "p", '"42"'), RawFact("s", "p", '"x y"', (("p", '"42"'),))]
    coding, out = encode_items(records, facts)
    assert [r.external_id for r in out] == ["s", "p", '"42"', '"x y"']
    assert out[2].kind is ItemKind.LITERAL and out[2].label == "42"


def test_unknown_identifier_is_a_hard_error():
    with pytest.raises(IngestError, match="ghost"):
        encode_items([ItemRecord("s", "s"), ItemRecord("p", "p")], [RawFact("s", "p", "ghost")])


def test_duplicate_item_record_rejected():
    with pytest.raises(IngestError, match="dup"):
        encode_items([ItemRecord("dup", "x"), ItemRecord("dup", "y")], [])


def test_fixture_codes_are_dense(worldcup_dir, worldcup_kb):
    n_declared = sum(1 for _ in open(worldcup_dir / "items.jsonl", encoding="utf-8"))
    literals = {'"15 July 2018"', '"13 July 2014"', '"78011"'}
    assert worldcup_kb.n_items == n_declared + len(literals)
    assert max(worldcup_kb.code(r.external_id) for r in worldcup_kb.records) == worldcup_kb.n_items - 1


def test_twelve_item_dump_has_max_code_eleven():
    facts = [(f"e{i}", "p0", f"e{i + 1}", ()) for i in range(10)]
    kb = make_kb(facts, predicates={"p0"})
    assert kb.n_items == 12
    assert max(kb.code(r.external_id) for r in kb.records) == 11


# -- bundle ------------------------------------------------------------------------


def test_item_in_three_facts():
    kb = make_kb([("x", "p", "a", ()), ("b", "p", "x", ()), ("c", "p", "d", (("q", "x"),))], predicates={"p", "q"})
    assert len(kb.neighborhood_ids(kb.code("x"))) == 3


def test_fixture_neighbors_of_france_team(worldcup_kb):
    kb = worldcup_kb
    ni = {kb.external_id(y) for y in kb.neighbors(kb.code("france_team"))}
    assert {"wc2018_final", "luzhniki"} <= ni


def test_ni_matches_naive_double_loop_on_1000_facts():
    rng = random.Random(3)
    facts, preds = random_facts(rng, 1000, 300, n_predicates=8)
    kb = make_kb(facts, predicates=set(preds))
    for rec in kb.records:
        x = kb.code(rec.external_id)
        got = [kb.external_id(y) for y in kb.neighbors(x)]
        assert set(got) == naive_ni(facts, rec.external_id)
        assert list(kb.neighbors(x)) == sorted(set(kb.neighbors(x).tolist()))


def test_bundle_round_trip(tmp_path):
    rng = random.Random(11)
    facts, preds = random_facts(rng, 200, 60)
    kb = make_kb(facts, predicates=set(preds))
    from kbspace.ingest import write_bundle

    write_bundle(tmp_path / "b", kb.table, kb.records)
    loaded = KnowledgeBase.load(tmp_path / "b")
    for name in ("nf_indptr", "nf_ids", "ni_indptr", "ni_ids"):
        np.testing.assert_array_equal(getattr(loaded, name), getattr(kb, name))
    for col in ("subj", "pred", "obj", "q_indptr", "q_pred", "q_obj"):
        np.testing.assert_array_equal(getattr(loaded.table, col), getattr(kb.table, col))
    assert [r.to_dict() for r in loaded.records] == [r.to_dict() for r in kb.records]


def test_version_mismatch_on_load(worldcup_bundle, tmp_path):
    import shutil

    copy = tmp_path / "b"
    shutil.copytree(worldcup_bundle, copy)
    header = json.loads((copy / "header.json").read_text())
    header["version"] = FORMAT_VERSION + 1
    (copy / "header.json").write_text(json.dumps(header))
    with pytest.raises(BundleError, match="version"):
        KnowledgeBase.load(copy)


def test_write_failure_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    coding, records = encode_items([ItemRecord("a", "a"), ItemRecord("p", "p")], [RawFact("a", "p", "a")])
    with pytest.raises(IngestError, match="file"):
        build_index([RawFact("a", "p", "a")], coding, records, blocker / "sub")


def test_triples_and_facts_paths_agree(worldcup_dir, worldcup_kb, tmp_path):
    via_triples = KnowledgeBase.load(
        ingest(worldcup_dir / "items.jsonl", tmp_path / "t", triples_path=worldcup_dir / "triples.tsv")
    )
    assert via_triples.n_items == worldcup_kb.n_items
    assert [tuple(map(via_triples.external_id, f.items())) for f in via_triples.facts(range(len(via_triples)))] == [
        tuple(map(worldcup_kb.external_id, f.items())) for f in worldcup_kb.facts(range(len(worldcup_kb)))
    ]


def test_ingest_requires_exactly_one_source(worldcup_dir, tmp_path):
    with pytest.raises(IngestError):
        ingest(worldcup_dir / "items.jsonl", tmp_path / "x")
