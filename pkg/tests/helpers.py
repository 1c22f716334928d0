"""Small KB builders shared by the tests."""

import random

from kbspace.ingest import FactTable, encode_items
from kbspace.store import KnowledgeBase
from kbspace.types import ItemKind, ItemRecord, RawFact


def make_kb(raw_facts, predicates=(), labels=None, types=()):
    """KnowledgeBase from tuples ``(s, p, o, ((qp, qo), ...))``.

    Every non-literal id gets a record; ids in ``predicates`` are predicates.
    """
    labels = labels or {}
    seen = {}
    for s, p, o, quals in raw_facts:
        for x in (s, p, o, *[v for pair in quals for v in pair]):
            if not x.startswith('"'):
                seen.setdefault(x, None)
    for x in predicates:
        seen.setdefault(x, None)
    records = []
    for x in seen:
        kind = ItemKind.PREDICATE if x in predicates else ItemKind.TYPE if x in types else ItemKind.ENTITY
        records.append(ItemRecord(x, labels.get(x, x.replace("_", " ")), kind=kind))
    facts = [RawFact(s, p, o, tuple(quals)) for s, p, o, quals in raw_facts]
    coding, records = encode_items(records, facts)
    return KnowledgeBase(FactTable.from_facts(facts, coding), records)


def random_facts(rng: random.Random, n_facts, n_entities, n_predicates=4, q_rate=0.3):
    ents = [f"e{i}" for i in range(n_entities)]
    preds = [f"p{i}" for i in range(n_predicates)]
    facts = []
    for _ in range(n_facts):
        quals = []
        while rng.random() < q_rate and len(quals) < 3:
            quals.append((rng.choice(preds), rng.choice(ents)))
        facts.append((rng.choice(ents), rng.choice(preds), rng.choice(ents), tuple(quals)))
    return facts, preds
