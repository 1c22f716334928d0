"""Question segmentation, fact pruning and the assembled search space."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .lexical import BM25, tokenize
from .scoring import Question, TermResult
from .store import KnowledgeBase
from .types import Fact, ItemKind

DEFAULT_STOPWORDS = frozenset(
    """
    a an the and or but nor of in on at to for from by with without about into onto
    over under between among through during before after above below up down out off
    against within along across behind beyond
    who whom whose what which when where why how that this these those there here
    is are was were be been being am do does did done doing has have had having
    will would shall should can could may might must
    i me my we us our you your he him his she her it its they them their
    not no yes as if than then so such too very also just only own same
    all any both each few more most other some
    """.split()
)


def load_stopwords(path) -> frozenset[str]:
    with open(path, encoding="utf-8") as fh:
        words = {w for line in fh for w in tokenize(line.split("#", 1)[0])}
    return frozenset(words)


class Segmenter:
    """Split a question into terms.

    Tokens are matched greedily against multi-word labels and aliases of KB
    items (longest match first); remaining tokens become single-word terms
    unless they are stopwords.
    """

    def __init__(self, phrases: Iterable[str] = (), stopwords: Iterable[str] = DEFAULT_STOPWORDS):
        self.stopwords = frozenset(stopwords)
        self.phrases: set[tuple[str, ...]] = set()
        for phrase in phrases:
            toks = tuple(tokenize(phrase))
            if len(toks) > 1 and not all(t in self.stopwords for t in toks):
                self.phrases.add(toks)
        self.max_len = max((len(p) for p in self.phrases), default=1)

    @classmethod
    def from_kb(cls, kb: KnowledgeBase, stopwords=DEFAULT_STOPWORDS) -> "Segmenter":
        phrases = []
        for rec in kb.records:
            if rec.kind is ItemKind.LITERAL:
                continue
            phrases.append(rec.label)
            phrases.extend(rec.aliases)
        return cls(phrases, stopwords)

    def __call__(self, text: str) -> list[str]:
        tokens = tokenize(text)
        terms, i = [], 0
        while i < len(tokens):
            for j in range(min(len(tokens), i + self.max_len), i + 1, -1):
                if tuple(tokens[i:j]) in self.phrases:
                    terms.append(" ".join(tokens[i:j]))
                    i = j
                    break
            else:
                if tokens[i] not in self.stopwords:
                    terms.append(tokens[i])
                i += 1
        return terms


class EmptyQuestionError(ValueError):
    pass


def prune_facts(kb: KnowledgeBase, x: int, p: float) -> np.ndarray:
    """Fact ids of ``x`` kept under pruning threshold ``p``.

    Predicates keep all their facts if they occur in at most ``p`` facts and
    none otherwise. Other items keep all facts unless they occur as object or
    qualifier object in more than ``p`` facts, in which case only the facts
    with ``x`` as subject remain.
    """
    if p < 0:
        raise ValueError("p must be >= 0")
    profile = kb.frequency(x)
    if kb.kind(x) is ItemKind.PREDICATE:
        return kb.neighborhood_ids(x) if profile.total <= p else np.zeros(0, dtype=np.int64)
    if profile.object_count + profile.qualifier_object_count > p:
        return kb.subject_fact_ids(x)
    return kb.neighborhood_ids(x)


def verbalize_fact(kb: KnowledgeBase, fact: Fact) -> str:
    labels = [kb.label(fact.subject), kb.label(fact.predicate), kb.label(fact.object)]
    for qp, qo in fact.qualifiers:
        labels += [kb.label(qp), kb.label(qo)]
    return " ".join(labels)


@dataclass
class SearchSpace:
    question: Question
    per_term: list[TermResult]
    fact_ids: np.ndarray
    item_codes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    items_in_space: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    dropped_predicates: list[int] = field(default_factory=list)
    missing_embeddings: int = 0
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def selected(self) -> list[int]:
        """Union of per-term top-k items, in term order without repeats."""
        out: dict[int, None] = {}
        for tr in self.per_term:
            for sc in tr.items:
                out.setdefault(sc.item, None)
        return list(out)

    def facts(self, kb: KnowledgeBase) -> list[Fact]:
        return kb.facts(self.fact_ids)

    @property
    def stats(self) -> dict:
        return {
            "n_facts": int(len(self.fact_ids)),
            "n_items": int(len(self.items_in_space)),
            "n_selected": len(self.selected),
            "missing_embeddings": self.missing_embeddings,
            "timings_ms": dict(self.timings),
        }


def finalize_facts(space: SearchSpace, kb: KnowledgeBase, fact_ids: np.ndarray) -> SearchSpace:
    """Set the fact ids of ``space`` and recompute the derived item sets."""
    fact_ids = np.unique(np.asarray(fact_ids, dtype=np.int64))
    t = kb.table
    if len(fact_ids):
        lo, hi = t.q_indptr[fact_ids], t.q_indptr[fact_ids + 1]
        q_idx = np.concatenate([np.arange(a, b) for a, b in zip(lo.tolist(), hi.tolist())] or [[]]).astype(np.int64)
        codes = np.unique(np.concatenate([
            t.subj[fact_ids], t.pred[fact_ids], t.obj[fact_ids], t.q_pred[q_idx], t.q_obj[q_idx],
        ]))
    else:
        codes = np.zeros(0, dtype=np.int64)
    space.fact_ids = fact_ids
    space.item_codes = codes
    space.items_in_space = codes[~kb.predicate_mask(codes)]
    return space


def fact_ranking(space: SearchSpace, kb: KnowledgeBase, query: str) -> list[tuple[int, float]]:
    """Facts of ``space`` ranked by BM25 of their verbalization against ``query``."""
    fact_ids = space.fact_ids.tolist()
    if not fact_ids:
        return []
    docs = [tokenize(verbalize_fact(kb, f)) for f in kb.facts(space.fact_ids)]
    scores = BM25(docs).scores(tokenize(query))
    order = sorted(range(len(fact_ids)), key=lambda i: (-scores[i], fact_ids[i]))
    return [(fact_ids[i], float(scores[i])) for i in order]


def bm25_filter(space: SearchSpace, kb: KnowledgeBase, n: int, query: str | None = None) -> SearchSpace:
    """Keep the ``n`` facts whose verbalization best matches the question."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(space.fact_ids) <= n:
        return space
    ranked = fact_ranking(space, kb, query if query is not None else space.question.raw)
    return finalize_facts(space, kb, [fid for fid, _ in ranked[:n]])


# ---------------------------------------------------------------------------
# serialization


def _ref(kb: KnowledgeBase, code: int) -> dict:
    rec = kb.records[code]
    return {"id": rec.external_id, "label": rec.label}


def fact_to_dict(kb: KnowledgeBase, f: Fact) -> dict:
    return {
        "fact_id": f.fact_id,
        "subject": _ref(kb, f.subject),
        "predicate": _ref(kb, f.predicate),
        "object": _ref(kb, f.object),
        "qualifiers": [[_ref(kb, qp), _ref(kb, qo)] for qp, qo in f.qualifiers],
    }


def space_to_dict(space: SearchSpace, kb: KnowledgeBase, timings: bool = True) -> dict:
    per_term = []
    for tr in space.per_term:
        per_term.append({
            "term": tr.term,
            "k": tr.k_used,
            "entropy": tr.entropy,
            "p": None if math.isinf(tr.p_used) else tr.p_used,
            "candidates": tr.candidates,
            "sorted_accesses": tr.sorted_accesses,
            "items": [
                {
                    **_ref(kb, sc.item),
                    "kind": kb.records[sc.item].kind.value,
                    "coh": sc.coh,
                    "conn": sc.conn,
                    "rel": sc.rel,
                    "match": sc.match,
                    "agg": sc.agg,
                }
                for sc in tr.items
            ],
        })
    facts = [fact_to_dict(kb, f) for f in kb.facts(space.fact_ids)]
    stats = space.stats
    stats["dropped_predicates"] = [kb.external_id(x) for x in space.dropped_predicates]
    if not timings:
        del stats["timings_ms"]
    return {
        "question": space.question.raw,
        "terms": list(space.question.terms),
        "per_term": per_term,
        "selected": [kb.external_id(x) for x in space.selected],
        "facts": facts,
        "stats": stats,
    }


def dumps(payload: dict) -> str:
    """Canonical JSON text used by both the CLI and the HTTP service."""
    return json.dumps(payload, ensure_ascii=False, separators=(",", ":"), allow_nan=False) + "\n"


def union_ids(arrays: Sequence[np.ndarray]) -> np.ndarray:
    if not arrays:
        return np.zeros(0, dtype=np.int64)
    return np.unique(np.concatenate(arrays))
