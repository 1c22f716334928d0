"""Pre-trained word / item vectors in word2vec text format."""

from __future__ import annotations

import logging
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

NEUTRAL = 0.5


class EmbeddingError(ValueError):
    pass


class EmbeddingStore:
    """Token -> vector lookup with min-max normalized cosine similarity.

    ``sim`` maps cosine from [-1, 1] onto [0, 1]. Missing tokens and zero
    vectors resolve to the neutral value 0.5.
    """

    def __init__(self, tokens: Sequence[str], vectors: np.ndarray):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or len(tokens) != len(vectors):
            raise EmbeddingError("tokens and vectors are not aligned")
        if not np.isfinite(vectors).all():
            raise EmbeddingError("non-finite embedding values")
        self.tokens = list(tokens)
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        self.vectors = vectors
        self.dim = vectors.shape[1]
        norms = np.linalg.norm(vectors, axis=1)
        self.norms = norms
        safe = np.where(norms > 0, norms, 1.0)
        self.unit = vectors / safe[:, None]
        self.valid = norms > 0

    @classmethod
    def empty(cls, dim: int = 1) -> "EmbeddingStore":
        return cls([], np.zeros((0, dim)))

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def vector(self, token: str) -> np.ndarray | None:
        i = self.index.get(token)
        return None if i is None else self.vectors[i]

    def sim(self, a: str, b: str) -> float:
        ia, ib = self.index.get(a), self.index.get(b)
        if ia is None or ib is None or not (self.valid[ia] and self.valid[ib]):
            return NEUTRAL
        cos = float(self.unit[ia] @ self.unit[ib])
        return (min(1.0, max(-1.0, cos)) + 1.0) / 2.0

    def unit_rows(self, tokens: Iterable[str | None]) -> tuple[np.ndarray, np.ndarray]:
        """Unit vectors for ``tokens`` plus a mask of which ones are usable."""
        rows = [self.index.get(t) if t is not None else None for t in tokens]
        mask = np.array([r is not None and bool(self.valid[r]) for r in rows], dtype=bool)
        out = np.zeros((len(rows), self.dim))
        if mask.any():
            out[mask] = self.unit[[r for r, ok in zip(rows, mask) if ok]]
        return out, mask

    def phrase_vector(self, words: Sequence[str]) -> np.ndarray | None:
        """Mean vector of the in-vocabulary words, or None if there are none."""
        found = [self.vectors[self.index[w]] for w in words if w in self.index]
        if not found:
            return None
        return np.mean(found, axis=0)


def sim_matrix(a_unit: np.ndarray, a_mask: np.ndarray, b_unit: np.ndarray, b_mask: np.ndarray) -> np.ndarray:
    """Normalized cosine between two sets of unit vectors; unusable rows give 0.5."""
    cos = np.clip(a_unit @ b_unit.T, -1.0, 1.0)
    out = (cos + 1.0) / 2.0
    out[~a_mask, :] = NEUTRAL
    out[:, ~b_mask] = NEUTRAL
    return out


def load_embeddings(path) -> EmbeddingStore:
    """Parse a word2vec text file: ``count dim`` header, then ``token v1 .. vdim`` lines.

    Tokens are single space-free fields (item external ids or words).
    """
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise EmbeddingError(f"{path}:1: expected 'count dim' header")
        try:
            declared, dim = int(header[0]), int(header[1])
        except ValueError:
            raise EmbeddingError(f"{path}:1: expected 'count dim' header") from None
        tokens: list[str] = []
        rows: list[list[float]] = []
        seen: dict[str, int] = {}
        for lineno, line in enumerate(fh, 2):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != dim + 1:
                raise EmbeddingError(
                    f"{path}:{lineno}: dimension mismatch, expected {dim} values, got {len(parts) - 1}"
                )
            token = parts[0]
            try:
                values = [float(v) for v in parts[1:]]
            except ValueError:
                raise EmbeddingError(f"{path}:{lineno}: non-numeric vector value") from None
            if token in seen:
                logger.warning("%s:%d: duplicate token %r, keeping the last vector", path, lineno, token)
                rows[seen[token]] = values
                continue
            seen[token] = len(tokens)
            tokens.append(token)
            rows.append(values)
    if len(tokens) != declared:
        logger.warning("%s: header declares %d vectors, found %d", path, declared, len(tokens))
    return EmbeddingStore(tokens, np.array(rows, dtype=np.float64).reshape(len(rows), dim))
