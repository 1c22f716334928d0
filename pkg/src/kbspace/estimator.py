"""Estimator-style front end: fit on a KB, transform questions into search spaces."""

from __future__ import annotations

import logging
import os
import time

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin, clone
from sklearn.utils.validation import check_is_fitted

from .embeddings import EmbeddingStore, load_embeddings
from .lexical import LexicalIndex, tokenize
from .scoring import (
    DEFAULT_K_MAX,
    DEFAULT_WEIGHTS,
    SIGNALS,
    PairwiseCache,
    Question,
    SignalWeights,
    TermResult,
    auto_k,
    auto_p,
    entropy,
    signal_matrix,
    threshold_topk,
)
from .search_space import (
    DEFAULT_STOPWORDS,
    EmptyQuestionError,
    SearchSpace,
    Segmenter,
    bm25_filter,
    dumps,
    finalize_facts,
    load_stopwords,
    prune_facts,
    space_to_dict,
    union_ids,
)
from .store import KnowledgeBase
from .types import ItemKind
from .validation import check_depth, check_k, check_p, check_question, check_signals

logger = logging.getLogger(__name__)


class SearchSpaceReducer(TransformerMixin, BaseEstimator):
    """Disambiguate question terms to KB items and collect their facts.

    Parameters
    ----------
    embeddings : str, path or EmbeddingStore, optional
        Vectors keyed by item external id and by lowercase word. Without
        them coherence and relatedness are a constant 0.5.
    d : int
        Lexical candidates retrieved per term.
    k : int or "auto"
        Items kept per term; "auto" picks it from the entropy of the
        candidates' fact counts.
    k_max : int
        Upper bound for automatic k.
    p : number or str
        Pruning threshold for frequent items, or an auto-p policy name
        ("exp5", "exp5-half", "exp4-half") that derives it from each term's k.
    weights : sequence of 4 floats
        Weights of (coherence, connectivity, relatedness, match); must sum to 1.
    skip_signals : tuple of str
        Signals that are not computed at all. Their weight is zeroed and the
        remaining weights renormalized.
    bm25_top_n : int, optional
        Keep only the n facts best matching the question under BM25.
    stopwords : str, path or iterable of str, optional
        Stopwords for question segmentation.

    Attributes
    ----------
    kb_ : KnowledgeBase
    lexicon_ : LexicalIndex
    embeddings_ : EmbeddingStore
    segmenter_ : Segmenter
    """

    def __init__(
        self,
        embeddings=None,
        d=20,
        k="auto",
        k_max=DEFAULT_K_MAX,
        p=1000,
        weights=DEFAULT_WEIGHTS,
        skip_signals=(),
        bm25_top_n=None,
        stopwords=None,
    ):
        self.embeddings = embeddings
        self.d = d
        self.k = k
        self.k_max = k_max
        self.p = p
        self.weights = weights
        self.skip_signals = skip_signals
        self.bm25_top_n = bm25_top_n
        self.stopwords = stopwords

    # -- fitting ------------------------------------------------------------

    def fit(self, X, y=None):
        """Load the KB (a ``KnowledgeBase`` or bundle path) and build the lexical index."""
        self.kb_ = X if isinstance(X, KnowledgeBase) else KnowledgeBase.load(X)
        if isinstance(self.embeddings, EmbeddingStore):
            self.embeddings_ = self.embeddings
        elif self.embeddings is None:
            self.embeddings_ = EmbeddingStore.empty()
        else:
            self.embeddings_ = load_embeddings(self.embeddings)
        self.lexicon_ = LexicalIndex(self.kb_.records)
        self.segmenter_ = Segmenter.from_kb(self.kb_, self._stopword_set())
        return self

    def _stopword_set(self):
        if self.stopwords is None:
            return DEFAULT_STOPWORDS
        if isinstance(self.stopwords, (str, os.PathLike)):
            return load_stopwords(self.stopwords)
        return frozenset(self.stopwords)

    def _effective_weights(self) -> tuple[SignalWeights, tuple[str, ...]]:
        weights = SignalWeights.coerce(self.weights)
        skip = check_signals(self.skip_signals)
        if any(getattr(weights, s) for s in skip):
            weights = weights.without(*skip)
        return weights, skip

    # -- querying -----------------------------------------------------------

    def question(self, text: str, terms=None) -> Question:
        check_is_fitted(self, "kb_")
        terms = self.segmenter_(text) if terms is None else [t for t in terms if t.strip()]
        if not terms:
            raise EmptyQuestionError(f"no terms left in question {text!r}")
        return Question(text, terms)

    def search_space(self, question, terms=None) -> SearchSpace:
        """Compute the search space for one question."""
        check_is_fitted(self, "kb_")
        raw, given_terms = check_question(question)
        d = check_depth(self.d)
        k = check_k(self.k)
        k_max = check_depth(self.k_max)
        p = check_p(self.p)
        weights, skip = self._effective_weights()
        active = tuple(s for s in SIGNALS if s not in skip)
        kb, emb = self.kb_, self.embeddings_

        timings = {}
        clock = time.perf_counter()

        def lap(stage):
            nonlocal clock
            now = time.perf_counter()
            timings[stage] = (now - clock) * 1000.0
            clock = now

        q = self.question(raw, terms if terms is not None else given_terms)
        lists = [self.lexicon_.candidates(t, d) for t in q.terms]
        lap("candidates")

        term_vectors = [emb.phrase_vector(tokenize(t)) for t in q.terms]
        cache = PairwiseCache(lists, kb, emb, term_vectors, active)
        score_rows = [signal_matrix(cache, lists, i, active) for i in range(q.m)]
        lap("signals")

        w = weights.as_tuple()
        walk = [SIGNALS.index(s) for s in active]
        per_term: list[TermResult] = []
        for i, cl in enumerate(lists):
            ent = None
            if k == "auto":
                if len(cl):
                    ent = entropy([kb.degree(x) for x in cl.items])
                    k_i = auto_k([kb.degree(x) for x in cl.items], d, k_max)
                else:
                    k_i = 1
            else:
                k_i = k
            tr = threshold_topk(cl.items, score_rows[i], w, k_i, i, q.terms[i], lists=walk)
            tr.k_used = k_i
            tr.entropy = ent
            tr.p_used = auto_p(k_i, p)
            per_term.append(tr)
        lap("topk")

        pieces, dropped = [], []
        for tr in per_term:
            for sc in tr.items:
                kept = prune_facts(kb, sc.item, tr.p_used)
                if kb.kind(sc.item) is ItemKind.PREDICATE and not len(kept) and kb.degree(sc.item):
                    dropped.append(sc.item)
                pieces.append(kept)
        if dropped:
            logger.info("predicates above the pruning threshold dropped: %s",
                        [kb.external_id(x) for x in dropped])
        space = SearchSpace(q, per_term, np.zeros(0, dtype=np.int64))
        space.dropped_predicates = sorted(set(dropped))
        space.missing_embeddings = cache.missing_items + cache.missing_terms
        finalize_facts(space, kb, union_ids(pieces))
        lap("facts")

        if self.bm25_top_n is not None:
            space = bm25_filter(space, kb, int(self.bm25_top_n))
            lap("bm25_filter")
        space.timings = timings
        space.timings["total"] = sum(timings.values())
        return space

    def transform(self, X) -> list[SearchSpace]:
        """One search space per question in ``X``."""
        check_is_fitted(self, "kb_")
        if isinstance(X, (str, dict, Question)):
            X = [X]
        return [self.search_space(q) for q in X]

    def predict(self, X) -> list[list[str]]:
        """External ids of the items selected for each question."""
        return [[self.kb_.external_id(x) for x in s.selected] for s in self.transform(X)]

    def score(self, X, y) -> float:
        """Fraction of questions whose search space contains a gold answer."""
        from .evaluator import answer_presence

        spaces = self.transform(X)
        hits = [answer_presence(s, gold, self.kb_) for s, gold in zip(spaces, y)]
        return float(np.mean(hits)) if hits else 0.0

    def to_json(self, question, terms=None, timings: bool = True) -> str:
        """Canonical JSON rendering of ``search_space``."""
        return dumps(space_to_dict(self.search_space(question, terms), self.kb_, timings=timings))

    def with_params(self, **params) -> "SearchSpaceReducer":
        """A copy with new parameters that shares this estimator's fitted state."""
        check_is_fitted(self, "kb_")
        if "embeddings" in params:
            raise ValueError("embeddings cannot be swapped on a fitted estimator; refit instead")
        est = clone(self).set_params(**params)
        for attr in ("kb_", "embeddings_", "lexicon_", "segmenter_"):
            setattr(est, attr, getattr(self, attr))
        if "stopwords" in params:
            est.segmenter_ = Segmenter.from_kb(est.kb_, est._stopword_set())
        return est

    def _more_tags(self):
        return {"X_types": ["string"], "requires_fit": True, "stateless": False}

