"""Relevance signals for candidate items and per-term top-k selection.

Each candidate ``x`` retrieved for question term ``i`` gets four scores in
[0, 1]:

* coherence: mean over the other terms of the best embedding similarity
  between ``x`` and that term's candidates,
* connectivity: the same with KB proximity (1 for 1 hop, 0.5 for 2 hops,
  0 beyond),
* relatedness: mean embedding similarity between ``x`` and the other terms,
* match: reciprocal lexical rank.

A weighted sum of the four ranks candidates; the threshold algorithm walks the
four score-sorted lists and stops as soon as the top-k cannot change.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .embeddings import EmbeddingStore, sim_matrix
from .lexical import CandidateList
from .store import KnowledgeBase

SIGNALS = ("coh", "conn", "rel", "match")
DEFAULT_WEIGHTS = (0.1, 0.3, 0.2, 0.4)
DEFAULT_K_MAX = 5

# auto-p policies: p = floor(10 ** (a - b * k))
P_POLICIES = {
    "exp5": (5.0, 1.0),
    "exp5-half": (5.0, 0.5),
    "exp4-half": (4.0, 0.5),
}


@dataclass(frozen=True)
class SignalWeights:
    coh: float = DEFAULT_WEIGHTS[0]
    conn: float = DEFAULT_WEIGHTS[1]
    rel: float = DEFAULT_WEIGHTS[2]
    match: float = DEFAULT_WEIGHTS[3]

    def __post_init__(self):
        values = self.as_tuple()
        if any(not math.isfinite(v) or v < 0 for v in values):
            raise ValueError(f"signal weights must be finite and non-negative, got {values}")
        if abs(sum(values) - 1.0) > 1e-9:
            raise ValueError(f"signal weights must sum to 1, got {values} (sum {sum(values)!r})")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.coh, self.conn, self.rel, self.match)

    @classmethod
    def coerce(cls, value) -> "SignalWeights":
        if value is None:
            return cls()
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            value = [float(v) for v in value.replace(",", " ").split()]
        if isinstance(value, Mapping):
            return cls(**{k: float(v) for k, v in value.items()})
        values = [float(v) for v in value]
        if len(values) != 4:
            raise ValueError(f"expected 4 weights (coh, conn, rel, match), got {len(values)}")
        return cls(*values)

    def without(self, *signals: str) -> "SignalWeights":
        """Zero the given signals and renormalize the rest to sum to 1."""
        unknown = set(signals) - set(SIGNALS)
        if unknown:
            raise ValueError(f"unknown signals {sorted(unknown)}")
        kept = {s: (0.0 if s in signals else getattr(self, s)) for s in SIGNALS}
        total = sum(kept.values())
        if total <= 0:
            raise ValueError("cannot drop every weighted signal")
        return SignalWeights(**{s: v / total for s, v in kept.items()})


@dataclass
class Question:
    raw: str
    terms: list[str]

    def __post_init__(self):
        if not self.terms or any(not t.strip() for t in self.terms):
            raise ValueError(f"question {self.raw!r} has no usable terms")

    @property
    def m(self) -> int:
        return len(self.terms)


@dataclass
class ScoredCandidate:
    item: int
    term_index: int
    coh: float
    conn: float
    rel: float
    match: float
    agg: float

    def signals(self) -> tuple[float, float, float, float]:
        return (self.coh, self.conn, self.rel, self.match)


@dataclass
class TermResult:
    term_index: int
    term: str
    k_used: int
    items: list[ScoredCandidate] = field(default_factory=list)
    candidates: int = 0
    sorted_accesses: int = 0
    entropy: float | None = None
    p_used: float | None = None


def agg_score(values: Sequence[float], weights: Sequence[float]) -> float:
    """Weighted sum, accumulated left to right."""
    total = 0.0
    for w, v in zip(weights, values):
        total += w * v
    return total


# ---------------------------------------------------------------------------
# pairwise cache and the four signals


class PairwiseCache:
    """Pairwise item-item and item-term scores for one question.

    Built once per question; the signals and the threshold algorithm's random
    accesses only read from it.
    """

    def __init__(
        self,
        lists: Sequence[CandidateList],
        kb: KnowledgeBase,
        embeddings: EmbeddingStore,
        term_vectors: Sequence[np.ndarray | None] = (),
        signals: Iterable[str] = SIGNALS,
    ):
        signals = set(signals)
        self.m = len(lists)
        self.items = sorted({e.item for cl in lists for e in cl.entries})
        pos = {item: r for r, item in enumerate(self.items)}
        self.rows = [np.array([pos[e.item] for e in cl.entries], dtype=np.int64) for cl in lists]
        self.sim = self.conn = self.rel = None
        self.missing_items = 0
        self.missing_terms = 0

        if {"coh", "rel"} & signals:
            unit, mask = embeddings.unit_rows(kb.external_id(x) for x in self.items)
            self.missing_items = int((~mask).sum())
            if "coh" in signals:
                self.sim = sim_matrix(unit, mask, unit, mask)
            if "rel" in signals:
                tv = np.zeros((self.m, embeddings.dim))
                tmask = np.zeros(self.m, dtype=bool)
                for k, vec in enumerate(term_vectors):
                    if vec is not None:
                        norm = np.linalg.norm(vec)
                        if norm > 0:
                            tv[k] = vec / norm
                            tmask[k] = True
                self.missing_terms = int((~tmask).sum())
                self.rel = sim_matrix(unit, mask, tv, tmask)
        if "conn" in signals:
            self.conn = kb.connectivity_matrix(self.items, self.items)


def _context_signal(pair: np.ndarray, rows: Sequence[np.ndarray], i: int) -> np.ndarray:
    m = len(rows)
    out = np.zeros(len(rows[i]))
    if m < 2 or not len(rows[i]):
        return out
    for k in range(m):
        if k == i or not len(rows[k]):
            continue
        out += pair[np.ix_(rows[i], rows[k])].max(axis=1)
    return out / (m - 1)


def coherence(cache: PairwiseCache, i: int) -> np.ndarray:
    """Coherence of every candidate of term ``i``; zeros when the question has one term."""
    return _context_signal(cache.sim, cache.rows, i)


def connectivity(cache: PairwiseCache, i: int) -> np.ndarray:
    return _context_signal(cache.conn, cache.rows, i)


def relatedness(cache: PairwiseCache, i: int) -> np.ndarray:
    rows = cache.rows[i]
    others = [k for k in range(cache.m) if k != i]
    if not others or not len(rows):
        return np.zeros(len(rows))
    block = cache.rel[np.ix_(rows, others)]
    return block.sum(axis=1) / len(others)


def term_match(candidates: CandidateList) -> np.ndarray:
    return 1.0 / np.array([e.rank for e in candidates.entries], dtype=np.float64)


def signal_matrix(cache: PairwiseCache, lists: Sequence[CandidateList], i: int, signals=SIGNALS) -> np.ndarray:
    """(n_candidates, 4) score matrix for term ``i``; skipped signals stay zero."""
    n = len(lists[i])
    out = np.zeros((n, 4))
    if "coh" in signals:
        out[:, 0] = coherence(cache, i)
    if "conn" in signals:
        out[:, 1] = connectivity(cache, i)
    if "rel" in signals:
        out[:, 2] = relatedness(cache, i)
    if "match" in signals:
        out[:, 3] = term_match(lists[i]) if n else []
    return out


# ---------------------------------------------------------------------------
# threshold algorithm


def threshold_topk(
    items: Sequence[int],
    scores: np.ndarray,
    weights: Sequence[float],
    k: int,
    term_index: int = 0,
    term: str = "",
    lists: Sequence[int] | None = None,
) -> TermResult:
    """Top-``k`` items by weighted score using Fagin's threshold algorithm.

    ``scores`` is an (n, 4) matrix of (coh, conn, rel, match); ``lists``
    selects which columns take part (all four by default). Each column is a
    sorted list ordered by (score desc, item asc). Each round reads one entry
    from every list, scores newly seen items from their row (random access)
    and recomputes the threshold from the last scores read. The scan stops
    once ``k`` seen items reach the threshold; on an exact tie with the
    threshold it reads one more round, because an unseen item could match the
    k-th aggregate with a smaller item code.

    Results are ordered by (aggregate desc, item asc), the same order a full
    sort would produce.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    items = np.asarray(items, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    n = len(items)
    if scores.shape != (n, 4):
        raise ValueError(f"scores shape {scores.shape} is not ({n}, 4)")
    lists = list(range(4)) if lists is None else list(lists)
    weights = [float(weights[c]) for c in lists]
    result = TermResult(term_index, term, min(k, n) if n else k, candidates=n)
    if n == 0:
        return result
    k_eff = min(k, n)
    rows = scores.tolist()
    columns = [scores[:, c].tolist() for c in lists]
    orders = [np.lexsort((items, -scores[:, c])).tolist() for c in lists]
    item_list = items.tolist()

    seen: set[int] = set()
    best: list[tuple[float, int, int]] = []  # min-heap on (agg, -item)
    steps = 0
    for depth in range(n):
        last = []
        for c, order in enumerate(orders):
            idx = order[depth]
            steps += 1
            last.append(columns[c][idx])
            if idx in seen:
                continue
            seen.add(idx)
            agg = agg_score([col[idx] for col in columns], weights)
            entry = (agg, -item_list[idx], idx)
            if len(best) < k_eff:
                heapq.heappush(best, entry)
            elif entry > best[0]:
                heapq.heapreplace(best, entry)
        if len(best) == k_eff and best[0][0] > agg_score(last, weights):
            break
    result.sorted_accesses = steps

    for agg, _, idx in sorted(best, reverse=True):
        result.items.append(ScoredCandidate(item_list[idx], term_index, *rows[idx], agg))
    return result


# ---------------------------------------------------------------------------
# automatic k and p


def entropy(frequencies: Sequence[float]) -> float:
    """Shannon entropy (bits) of normalized frequencies; all-zero means uniform."""
    f = np.asarray(frequencies, dtype=np.float64)
    if not len(f):
        raise ValueError("entropy of an empty distribution")
    if (f < 0).any():
        raise ValueError("negative frequency")
    total = f.sum()
    p = np.full(len(f), 1.0 / len(f)) if total == 0 else f / total
    p = p[p > 0]
    return max(0.0, float(-(p * np.log2(p)).sum()))


def auto_k(frequencies: Sequence[float], d: int, k_max: int = DEFAULT_K_MAX) -> int:
    """k = floor(entropy) + 1, clamped to [1, min(d, k_max)].

    A 1e-9 slack before flooring keeps exact powers of two (16 uniform
    candidates -> 4 bits) from rounding down.
    """
    ent = entropy(frequencies)
    k = math.floor(ent + 1e-9) + 1
    return max(1, min(k, d, k_max))


def auto_p(k: int, policy: str | int | float = "exp5") -> float:
    """Pruning threshold derived from ``k``; numeric policies are returned unchanged."""
    if isinstance(policy, (int, float)) and not isinstance(policy, bool):
        if policy < 0:
            raise ValueError("p must be >= 0")
        return policy
    try:
        a, b = P_POLICIES[policy]
    except KeyError:
        raise ValueError(f"unknown p policy {policy!r}; expected one of {sorted(P_POLICIES)}") from None
    return math.floor(10.0 ** (a - b * k) + 1e-9)
