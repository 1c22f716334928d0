"""BM25 candidate retrieval over item documents (label, aliases, description)."""

from __future__ import annotations

import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .types import ItemRecord

BM25_K1 = 1.5
BM25_B = 0.75

_WORD = re.compile(r"\w+", re.UNICODE)


def fold(text: str) -> str:
    """Lowercase and strip diacritics."""
    decomposed = unicodedata.normalize("NFKD", text)
    stripped = "".join(ch for ch in decomposed if not unicodedata.combining(ch))
    return stripped.casefold()


def tokenize(text: str) -> list[str]:
    return [tok for tok in _WORD.findall(fold(text)) if tok.strip("_")]


def item_document(record: ItemRecord) -> list[str]:
    parts = [record.label, *record.aliases, record.description]
    return tokenize(" ".join(p for p in parts if p))


class BM25:
    """Okapi BM25 over pre-tokenized documents.

    IDF uses ``log(1 + (N - n + 0.5) / (n + 0.5))`` which stays positive even
    for tokens present in most documents.
    """

    def __init__(self, documents: Sequence[Sequence[str]], k1: float = BM25_K1, b: float = BM25_B):
        if not len(documents):
            raise ValueError("cannot build a BM25 index over an empty corpus")
        self.k1 = k1
        self.b = b
        self.n_docs = len(documents)
        self.doc_len = np.array([len(doc) for doc in documents], dtype=np.float64)
        self.avgdl = float(self.doc_len.mean()) or 1.0
        postings: dict[str, tuple[list[int], list[int]]] = {}
        for doc_id, doc in enumerate(documents):
            for tok, tf in Counter(doc).items():
                ids, tfs = postings.setdefault(tok, ([], []))
                ids.append(doc_id)
                tfs.append(tf)
        self.postings = {
            tok: (np.array(ids, dtype=np.int64), np.array(tfs, dtype=np.float64))
            for tok, (ids, tfs) in postings.items()
        }
        self._norm = k1 * (1.0 - b + b * self.doc_len / self.avgdl)

    def df(self, token: str) -> int:
        post = self.postings.get(token)
        return 0 if post is None else len(post[0])

    def idf(self, token: str) -> float:
        n = self.df(token)
        return math.log(1.0 + (self.n_docs - n + 0.5) / (n + 0.5))

    def scores(self, query: Iterable[str]) -> np.ndarray:
        """Score every document; query tokens are accumulated in query order."""
        out = np.zeros(self.n_docs, dtype=np.float64)
        for tok in query:
            post = self.postings.get(tok)
            if post is None:
                continue
            ids, tf = post
            out[ids] += self.idf(tok) * tf * (self.k1 + 1.0) / (tf + self._norm[ids])
        return out

    def top(self, query: Iterable[str], n: int) -> list[tuple[int, float]]:
        """Best ``n`` matching documents by (score desc, doc id asc); zero scores excluded."""
        scores = self.scores(list(query))
        hits = np.flatnonzero(scores > 0)
        order = np.lexsort((hits, -scores[hits]))[:n]
        return [(int(hits[i]), float(scores[hits[i]])) for i in order]


@dataclass
class CandidateEntry:
    item: int
    score: float
    rank: int


@dataclass
class CandidateList:
    term: str
    entries: list[CandidateEntry] = field(default_factory=list)

    @property
    def items(self) -> list[int]:
        return [e.item for e in self.entries]

    def __len__(self):
        return len(self.entries)

    def rank(self, item: int) -> int:
        for entry in self.entries:
            if entry.item == item:
                return entry.rank
        raise KeyError(item)


class LexicalIndex:
    """Inverted index whose documents are KB items, one per item code."""

    def __init__(self, records: Sequence[ItemRecord], k1: float = BM25_K1, b: float = BM25_B):
        self.documents = [item_document(rec) for rec in records]
        self.bm25 = BM25(self.documents, k1=k1, b=b)

    def candidates(self, term: str, d: int) -> CandidateList:
        if int(d) != d or d < 1:
            raise ValueError(f"candidate depth must be a positive integer, got {d!r}")
        hits = self.bm25.top(tokenize(term), int(d))
        return CandidateList(
            term, [CandidateEntry(item, score, rank) for rank, (item, score) in enumerate(hits, 1)]
        )


def build_lexical_index(records: Sequence[ItemRecord], **kwargs) -> LexicalIndex:
    return LexicalIndex(records, **kwargs)
