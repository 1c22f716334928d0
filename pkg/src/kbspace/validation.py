"""Parameter and input checks shared by the estimator, CLI and service."""

from __future__ import annotations

import math
from numbers import Integral, Real
from typing import Iterable

from .scoring import P_POLICIES, SIGNALS, Question


def check_depth(d) -> int:
    if isinstance(d, bool) or not isinstance(d, Integral) or d < 1:
        raise ValueError(f"d must be a positive integer, got {d!r}")
    return int(d)


def check_k(k) -> int | str:
    if k == "auto":
        return k
    if isinstance(k, bool) or not isinstance(k, Integral) or k < 1:
        raise ValueError(f"k must be 'auto' or a positive integer, got {k!r}")
    return int(k)


def check_p(p) -> float | str:
    """A non-negative number (``inf`` disables pruning) or an auto-p policy name."""
    if isinstance(p, str):
        if p in P_POLICIES:
            return p
        try:
            p = float(p)
        except ValueError:
            raise ValueError(f"p must be a number or one of {sorted(P_POLICIES)}, got {p!r}") from None
    if isinstance(p, bool) or not isinstance(p, Real) or math.isnan(p) or p < 0:
        raise ValueError(f"p must be >= 0, got {p!r}")
    return int(p) if float(p).is_integer() else float(p)


def check_signals(signals: Iterable[str]) -> tuple[str, ...]:
    signals = tuple(signals)
    unknown = set(signals) - set(SIGNALS)
    if unknown:
        raise ValueError(f"unknown signals {sorted(unknown)}; expected a subset of {SIGNALS}")
    if set(signals) == set(SIGNALS):
        raise ValueError("cannot skip all four signals")
    return signals


def check_question(question) -> tuple[str, list[str] | None]:
    """Accept a raw string, a Question, or a mapping with 'question' and optional 'terms'."""
    if isinstance(question, Question):
        return question.raw, list(question.terms)
    if isinstance(question, str):
        return question, None
    if isinstance(question, dict):
        raw = question.get("question")
        terms = question.get("terms")
        if not isinstance(raw, str):
            raise ValueError("question mapping needs a 'question' string")
        if terms is not None and (
            not isinstance(terms, list) or not all(isinstance(t, str) for t in terms)
        ):
            raise ValueError("'terms' must be a list of strings")
        return raw, terms
    raise TypeError(f"cannot interpret {type(question).__name__} as a question")
